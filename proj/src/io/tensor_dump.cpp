#include "mixq/io/tensor_dump.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>

#include "mixq/core/errors.hpp"

static_assert(std::endian::native == std::endian::little, "tensor dumps assume a little-endian host");

namespace mixq::io {
namespace {

constexpr char kMagic[8] = {'M', 'I', 'X', 'Q', 'T', 'N', 'S', 'R'};
constexpr std::size_t kDigest = 32;

template <class T>
void put(std::string& s, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  s.append(b, sizeof(T));
}

template <class T>
T get(std::string_view s, std::size_t& pos) {
  if (pos + sizeof(T) > s.size()) throw DataError("tensor dump truncated");
  T v;
  std::memcpy(&v, s.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

void sha256(std::string_view bytes, unsigned char* out) {
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out, &len, EVP_sha256(), nullptr) != 1 || len != kDigest)
    throw Error("SHA-256 computation failed");
}

}  // namespace

std::uint64_t TensorDump::numel() const {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string encode_tensor(const TensorDump& t) {
  if (t.numel() != t.data.size()) throw UsageError("tensor dump: payload does not match shape");
  std::string s(kMagic, sizeof(kMagic));
  put<std::uint32_t>(s, kTensorDumpVersion);
  put<std::uint32_t>(s, kDtypeFloat64);
  put<std::uint32_t>(s, static_cast<std::uint32_t>(t.shape.size()));
  for (auto d : t.shape) put<std::uint64_t>(s, d);
  s.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(double));
  unsigned char md[kDigest];
  sha256(s, md);
  s.append(reinterpret_cast<const char*>(md), kDigest);
  return s;
}

TensorDump decode_tensor(std::string_view bytes) {
  if (bytes.size() < sizeof(kMagic) + 12 + kDigest || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw DataError("not a tensor dump (bad magic)");
  const auto body = bytes.substr(0, bytes.size() - kDigest);
  unsigned char md[kDigest];
  sha256(body, md);
  if (std::memcmp(md, bytes.data() + body.size(), kDigest) != 0) throw DataError("tensor dump checksum mismatch");
  std::size_t pos = sizeof(kMagic);
  const auto version = get<std::uint32_t>(body, pos);
  if (version != kTensorDumpVersion) throw DataError("unsupported tensor dump version " + std::to_string(version));
  const auto dtype = get<std::uint32_t>(body, pos);
  if (dtype != kDtypeFloat64) throw DataError("unsupported tensor dump dtype " + std::to_string(dtype));
  const auto ndim = get<std::uint32_t>(body, pos);
  TensorDump t;
  for (std::uint32_t i = 0; i < ndim; ++i) t.shape.push_back(get<std::uint64_t>(body, pos));
  const std::uint64_t n = t.numel();
  if (n > (body.size() - pos) / sizeof(double) || body.size() - pos != n * sizeof(double))
    throw DataError("tensor dump payload length does not match its shape");
  t.data.resize(n);
  std::memcpy(t.data.data(), body.data() + pos, n * sizeof(double));
  return t;
}

}  // namespace mixq::io
