#include "mmdyn/hash.hpp"

#include <openssl/sha.h>

#include <array>

#include <fmt/format.h>

namespace mmdyn {

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
  SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest.data());
  std::string out;
  out.reserve(2 * digest.size());
  for (unsigned char b : digest) out += fmt::format("{:02x}", b);
  return out;
}

}  // namespace mmdyn
