#include "mia/compress.hpp"

#include <zlib.h>

#include <vector>

#include "mia/errors.hpp"

namespace mia {

std::size_t zlib_compressed_size(std::string_view data) {
  uLongf size = compressBound(static_cast<uLong>(data.size()));
  std::vector<Bytef> buf(size);
  int rc = compress2(buf.data(), &size, reinterpret_cast<const Bytef*>(data.data()),
                     static_cast<uLong>(data.size()), Z_DEFAULT_COMPRESSION);
  if (rc != Z_OK) throw Error("zlib compress2 failed with code " + std::to_string(rc));
  return size;
}

}  // namespace mia
