#pragma once

#include <cstddef>
#include <string_view>

namespace mia {

/// Size in bytes of `data` compressed to a zlib stream (RFC 1950) at the
/// default compression level.
std::size_t zlib_compressed_size(std::string_view data);

}  // namespace mia
