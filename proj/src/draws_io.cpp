#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "rstdr/errors.hpp"
#include "rstdr/mcmc.hpp"

namespace rstdr::mcmc {

namespace {

constexpr char kMagic[4] = {'R', 'S', 'T', 'D'};
constexpr std::uint32_t kVersion = 1;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_or_throw(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open '" + path + "'");
  return f;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw SchemaError("truncated draws file");
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (int b = 0; b < 8; ++b) out.put(static_cast<char>((bits >> (8 * b)) & 0xff));
}

double get_f64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw SchemaError("truncated draws file");
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

}  // namespace

void write_draws_csv(const std::string& path, const PosteriorDraws& draws, bool include_cdf) {
  FilePtr f = open_or_throw(path, "wb");
  std::fputs("iteration,parameter,index,value\n", f.get());
  for (int d = 0; d < draws.draw_count(); ++d) {
    for (std::size_t c = 0; c < draws.columns.size(); ++c) {
      std::fprintf(f.get(), "%d,%s,%d,%.17g\n", draws.iterations[d], draws.columns[c].parameter.c_str(),
                   draws.columns[c].index, draws.values(d, static_cast<Eigen::Index>(c)));
    }
    if (!include_cdf) continue;
    for (Eigen::Index i = 0; i < draws.cdf.cols(); ++i) {
      std::fprintf(f.get(), "%d,cdf,%ld,%.17g\n", draws.iterations[d], static_cast<long>(i), draws.cdf(d, i));
    }
  }
  if (std::ferror(f.get())) throw IoError("write failed for '" + path + "'");
}

void write_draws_binary(const std::string& path, const PosteriorDraws& draws) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "'");
  std::vector<std::string> names;
  for (const auto& c : draws.columns) names.push_back(c.parameter + "[" + std::to_string(c.index) + "]");
  for (Eigen::Index i = 0; i < draws.cdf.cols(); ++i) names.push_back("cdf[" + std::to_string(i) + "]");

  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(draws.draw_count()));
  put_u32(out, static_cast<std::uint32_t>(names.size()));
  for (const auto& name : names) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
  }
  for (Eigen::Index c = 0; c < draws.values.cols(); ++c) {
    for (int d = 0; d < draws.draw_count(); ++d) put_f64(out, draws.values(d, c));
  }
  for (Eigen::Index c = 0; c < draws.cdf.cols(); ++c) {
    for (int d = 0; d < draws.draw_count(); ++d) put_f64(out, draws.cdf(d, c));
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

BinaryDraws read_draws_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw SchemaError("bad magic in '" + path + "'");
  if (get_u32(in) != kVersion) throw SchemaError("unsupported draws format version");
  const std::uint32_t draw_count = get_u32(in);
  const std::uint32_t column_count = get_u32(in);
  BinaryDraws out;
  for (std::uint32_t c = 0; c < column_count; ++c) {
    const std::uint32_t len = get_u32(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw SchemaError("truncated column name");
    out.names.push_back(std::move(name));
  }
  out.values.resize(draw_count, column_count);
  for (std::uint32_t c = 0; c < column_count; ++c) {
    for (std::uint32_t d = 0; d < draw_count; ++d) out.values(d, c) = get_f64(in);
  }
  return out;
}

}  // namespace rstdr::mcmc
