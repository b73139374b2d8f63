#include "midframe/flo_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

namespace midframe {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// The on-disk layout is little-endian; this codebase targets little-endian
// hosts, so raw bit copies are exact.
static_assert(sizeof(float) == 4 && sizeof(int32_t) == 4);

}  // namespace

DenseFlow read_flo(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open " + path);
  float magic = 0.0f;
  int32_t w = 0, h = 0;
  if (std::fread(&magic, 4, 1, f.get()) != 1) throw IoError("truncated .flo header: " + path);
  if (magic != kFloMagic) throw DataError("bad .flo magic in " + path);
  if (std::fread(&w, 4, 1, f.get()) != 1 || std::fread(&h, 4, 1, f.get()) != 1)
    throw IoError("truncated .flo header: " + path);
  if (w < 1 || h < 1) throw DataError("bad .flo dimensions in " + path);

  DenseFlow flow(w, h);
  std::vector<float> inter(static_cast<std::size_t>(w) * h * 2);
  if (std::fread(inter.data(), 4, inter.size(), f.get()) != inter.size())
    throw IoError("truncated .flo payload: " + path);
  for (std::size_t i = 0; i < flow.size(); ++i) {
    flow.u[i] = inter[2 * i];
    flow.v[i] = inter[2 * i + 1];
  }
  return flow;
}

void write_flo(const DenseFlow& flow, const std::string& path, bool allow_nonfinite) {
  if (flow.width < 1 || flow.height < 1) throw DataError("empty flow");
  if (!allow_nonfinite) {
    for (std::size_t i = 0; i < flow.size(); ++i)
      if (!std::isfinite(flow.u[i]) || !std::isfinite(flow.v[i]))
        throw NumericError("non-finite flow value; pass allow_nonfinite to force");
  }
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot open for writing: " + path);
  const float magic = kFloMagic;
  const int32_t w = flow.width, h = flow.height;
  std::vector<float> inter(static_cast<std::size_t>(w) * h * 2);
  for (std::size_t i = 0; i < flow.size(); ++i) {
    inter[2 * i] = flow.u[i];
    inter[2 * i + 1] = flow.v[i];
  }
  if (std::fwrite(&magic, 4, 1, f.get()) != 1 || std::fwrite(&w, 4, 1, f.get()) != 1 ||
      std::fwrite(&h, 4, 1, f.get()) != 1 ||
      std::fwrite(inter.data(), 4, inter.size(), f.get()) != inter.size())
    throw IoError("short write: " + path);
}

}  // namespace midframe
