#include "mixq/io/files.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <sstream>
#include <system_error>

#include "mixq/core/errors.hpp"

namespace mixq::io {

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 computation failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 15]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& p) { return sha256_hex(read_file(p)); }

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw DataError("error reading '" + p.string() + "'");
  return std::move(ss).str();
}

void write_atomic(const std::filesystem::path& p, std::string_view data) {
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  if (ec) throw UsageError("cannot create directory '" + p.parent_path().string() + "': " + ec.message());
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write '" + tmp.string() + "'");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw UsageError("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, p, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw UsageError("cannot move '" + tmp.string() + "' to '" + p.string() + "': " + ec.message());
  }
}

}  // namespace mixq::io
