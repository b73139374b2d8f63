#include "midframe/flow_lk.hpp"

#include <algorithm>
#include <cmath>

#include "midframe/parallel.hpp"

namespace midframe {

void ShiTomasiParams::validate() const {
  if (max_corners < 1) throw DataError("max_corners must be >= 1");
  if (!(quality_level > 0.0f && quality_level <= 1.0f))
    throw DataError("quality_level must be in (0,1]");
  if (min_distance < 0.0f) throw DataError("min_distance must be >= 0");
  if (block_size < 3 || block_size % 2 == 0)
    throw DataError("block_size must be odd and >= 3");
}

void LKParams::validate() const {
  if (win_size < 3 || win_size % 2 == 0) throw DataError("win_size must be odd and >= 3");
  if (levels < 1) throw DataError("levels must be >= 1");
  if (max_iterations < 1) throw DataError("max_iterations must be >= 1");
  if (!(epsilon > 0.0f)) throw DataError("epsilon must be positive");
}

namespace {

// Central differences with replicate borders.
void gradients(const Image& img, std::vector<float>& gx, std::vector<float>& gy) {
  const int w = img.width, h = img.height;
  const float* src = img.plane(0);
  gx.resize(img.pixels());
  gy.resize(img.pixels());
  parallel_rows(h, [&](int y) {
    const int ym = std::max(0, y - 1);
    const int yp = std::min(h - 1, y + 1);
    const float* rm = src + static_cast<std::size_t>(ym) * w;
    const float* rp = src + static_cast<std::size_t>(yp) * w;
    const float* rc = src + static_cast<std::size_t>(y) * w;
    const std::size_t row = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(0, x - 1);
      const int xp = std::min(w - 1, x + 1);
      gx[row + x] = 0.5f * (rc[xp] - rc[xm]);
      gy[row + x] = 0.5f * (rp[x] - rm[x]);
    }
  });
}

void box_sum_plane(const std::vector<float>& src, std::vector<float>& dst, int w,
                   int h, int radius) {
  std::vector<float> tmp(src.size());
  parallel_rows(h, [&](int y) {
    const float* srow = src.data() + static_cast<std::size_t>(y) * w;
    float* trow = tmp.data() + static_cast<std::size_t>(y) * w;
    double acc = 0.0;
    for (int x = 0; x <= std::min(radius, w - 1); ++x) acc += srow[x];
    for (int x = 0; x < w; ++x) {
      trow[x] = static_cast<float>(acc);
      if (x + radius + 1 < w) acc += srow[x + radius + 1];
      if (x - radius >= 0) acc -= srow[x - radius];
    }
  });
  parallel_rows(h, [&](int y) {
    float* drow = dst.data() + static_cast<std::size_t>(y) * w;
    const int y0 = std::max(0, y - radius);
    const int y1 = std::min(h - 1, y + radius);
    for (int x = 0; x < w; ++x) drow[x] = 0.0f;
    for (int j = y0; j <= y1; ++j) {
      const float* trow = tmp.data() + static_cast<std::size_t>(j) * w;
      for (int x = 0; x < w; ++x) drow[x] += trow[x];
    }
  });
}

}  // namespace

std::vector<float> min_eig_response(const Image& img, int block_size) {
  if (img.channels != 1) throw DataError("min_eig_response needs 1-channel input");
  if (img.width < block_size || img.height < block_size)
    throw DataError("image smaller than block_size");
  const int w = img.width, h = img.height;
  std::vector<float> gx, gy;
  gradients(img, gx, gy);

  const std::size_t n = img.pixels();
  std::vector<float> gxx(n), gxy(n), gyy(n);
  parallel_rows(h, [&](int y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      const std::size_t i = row + x;
      gxx[i] = gx[i] * gx[i];
      gxy[i] = gx[i] * gy[i];
      gyy[i] = gy[i] * gy[i];
    }
  });

  const int radius = block_size / 2;
  std::vector<float> sxx(n), sxy(n), syy(n);
  box_sum_plane(gxx, sxx, w, h, radius);
  box_sum_plane(gxy, sxy, w, h, radius);
  box_sum_plane(gyy, syy, w, h, radius);

  std::vector<float> response(n);
  parallel_rows(h, [&](int y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      const std::size_t i = row + x;
      const double p = sxx[i], q = syy[i], r = sxy[i];
      const double half_sum = 0.5 * (p + q);
      const double half_diff = 0.5 * (p - q);
      response[i] = static_cast<float>(half_sum - std::sqrt(half_diff * half_diff + r * r));
    }
  });
  return response;
}

std::vector<Corner> detect_corners(const Image& img, const ShiTomasiParams& params) {
  params.validate();
  const Image gray = to_grayscale(img);
  const std::vector<float> response = min_eig_response(gray, params.block_size);
  const int w = gray.width, h = gray.height;

  float max_response = 0.0f;
  for (float r : response) max_response = std::max(max_response, r);
  if (max_response <= 0.0f) return {};

  // only 3x3 local maxima can survive the greedy min-distance pass, so
  // everything else is dropped before sorting
  const float threshold = params.quality_level * max_response;
  std::vector<Corner> candidates;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float r = response[static_cast<std::size_t>(y) * w + x];
      if (r < threshold || r <= 0.0f) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        const int yy = std::clamp(y + dy, 0, h - 1);
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = std::clamp(x + dx, 0, w - 1);
          if ((dx || dy) && response[static_cast<std::size_t>(yy) * w + xx] > r) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) candidates.push_back({static_cast<float>(x), static_cast<float>(y), r});
    }
  }
  // Descending response; ties broken by position so the order is total.
  std::sort(candidates.begin(), candidates.end(), [](const Corner& a, const Corner& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });

  const float min_d2 = params.min_distance * params.min_distance;
  std::vector<Corner> accepted;
  for (const Corner& c : candidates) {
    bool ok = true;
    for (const Corner& a : accepted) {
      const float dx = c.x - a.x, dy = c.y - a.y;
      if (dx * dx + dy * dy < min_d2) {
        ok = false;
        break;
      }
    }
    if (ok) {
      accepted.push_back(c);
      if (static_cast<int>(accepted.size()) >= params.max_corners) break;
    }
  }
  return accepted;
}

namespace {

float bilinear_raw(const float* p, int w, int h, float x, float y) {
  const float fx = std::floor(x), fy = std::floor(y);
  int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  const float ax = x - fx, ay = y - fy;
  const int x0c = std::clamp(x0, 0, w - 1), x1c = std::clamp(x0 + 1, 0, w - 1);
  const int y0c = std::clamp(y0, 0, h - 1), y1c = std::clamp(y0 + 1, 0, h - 1);
  const float v00 = p[static_cast<std::size_t>(y0c) * w + x0c];
  const float v10 = p[static_cast<std::size_t>(y0c) * w + x1c];
  const float v01 = p[static_cast<std::size_t>(y1c) * w + x0c];
  const float v11 = p[static_cast<std::size_t>(y1c) * w + x1c];
  return (1 - ax) * (1 - ay) * v00 + ax * (1 - ay) * v10 + (1 - ax) * ay * v01 +
         ax * ay * v11;
}

struct LevelData {
  Image img1, img2;
  std::vector<float> gx, gy;  // gradients of img1
};

// Track one point at one pyramid level starting from displacement d.
// Returns false when the point is untrackable there.
bool track_level(const LevelData& lvl, float px, float py, float& du, float& dv,
                 const LKParams& params) {
  const int w = lvl.img1.width, h = lvl.img1.height;
  const int r = params.win_size / 2;
  const float area = static_cast<float>(params.win_size) * params.win_size;

  if (px < r || py < r || px > w - 1 - r || py > h - 1 - r) return false;

  // Spatial gradient matrix is fixed per point.
  double g11 = 0.0, g12 = 0.0, g22 = 0.0;
  const int win = params.win_size;
  std::vector<float> patch(static_cast<std::size_t>(win) * win);
  std::vector<float> pgx(patch.size()), pgy(patch.size());
  const float* i1 = lvl.img1.plane(0);
  for (int j = -r; j <= r; ++j) {
    for (int i = -r; i <= r; ++i) {
      const std::size_t k = static_cast<std::size_t>(j + r) * win + (i + r);
      const float sx = px + i, sy = py + j;
      patch[k] = bilinear_raw(i1, w, h, sx, sy);
      pgx[k] = bilinear_raw(lvl.gx.data(), w, h, sx, sy);
      pgy[k] = bilinear_raw(lvl.gy.data(), w, h, sx, sy);
      g11 += double(pgx[k]) * pgx[k];
      g12 += double(pgx[k]) * pgy[k];
      g22 += double(pgy[k]) * pgy[k];
    }
  }
  const double half_sum = 0.5 * (g11 + g22);
  const double half_diff = 0.5 * (g11 - g22);
  const double min_eig = half_sum - std::sqrt(half_diff * half_diff + g12 * g12);
  if (min_eig / area < params.min_eig_threshold) return false;
  const double det = g11 * g22 - g12 * g12;
  if (det <= 0.0) return false;
  const double inv_det = 1.0 / det;

  const float* i2 = lvl.img2.plane(0);
  for (int it = 0; it < params.max_iterations; ++it) {
    const float cx = px + du, cy = py + dv;
    if (cx < r || cy < r || cx > w - 1 - r || cy > h - 1 - r) return false;
    double b1 = 0.0, b2 = 0.0;
    for (int j = -r; j <= r; ++j) {
      for (int i = -r; i <= r; ++i) {
        const std::size_t k = static_cast<std::size_t>(j + r) * win + (i + r);
        const float diff = patch[k] - bilinear_raw(i2, w, h, cx + i, cy + j);
        b1 += double(diff) * pgx[k];
        b2 += double(diff) * pgy[k];
      }
    }
    const float step_u = static_cast<float>((g22 * b1 - g12 * b2) * inv_det);
    const float step_v = static_cast<float>((g11 * b2 - g12 * b1) * inv_det);
    du += step_u;
    dv += step_v;
    if (std::sqrt(step_u * step_u + step_v * step_v) < params.epsilon) break;
  }
  const float fx = px + du, fy = py + dv;
  return fx >= r && fy >= r && fx <= w - 1 - r && fy <= h - 1 - r;
}

}  // namespace

SparseFlow lk_track(const Image& img1, const Image& img2,
                    const std::vector<Corner>& points, const LKParams& params) {
  params.validate();
  if (img1.width != img2.width || img1.height != img2.height)
    throw DataError("image dimensions differ");

  const Image gray1 = to_grayscale(img1);
  const Image gray2 = to_grayscale(img2);

  // Halving pyramid for the tracker (single level by default).
  std::vector<LevelData> levels;
  levels.emplace_back();
  levels.back().img1 = gray1;
  levels.back().img2 = gray2;
  for (int l = 1; l < params.levels; ++l) {
    const Image& p1 = levels.back().img1;
    const Image& p2 = levels.back().img2;
    const int nw = std::max(1, p1.width / 2), nh = std::max(1, p1.height / 2);
    if (nw < params.win_size || nh < params.win_size) break;
    levels.push_back({});
    levels.back().img1 = resize_bilinear(gaussian_blur(p1, 1.0f), nw, nh);
    levels.back().img2 = resize_bilinear(gaussian_blur(p2, 1.0f), nw, nh);
  }
  for (LevelData& lvl : levels) gradients(lvl.img1, lvl.gx, lvl.gy);

  SparseFlow out;
  out.matches.resize(points.size());
  const int npts = static_cast<int>(points.size());
  // Output order equals input order no matter how points are scheduled.
#pragma omp parallel for schedule(static)
  for (int pi = 0; pi < npts; ++pi) {
    const Corner& pt = points[static_cast<std::size_t>(pi)];
    SparseMatch m;
    m.x = pt.x;
    m.y = pt.y;
    float du = 0.0f, dv = 0.0f;
    bool ok = true;
    for (int l = static_cast<int>(levels.size()) - 1; l >= 0; --l) {
      const float s = std::pow(2.0f, static_cast<float>(l));
      if (l < static_cast<int>(levels.size()) - 1) {
        du *= 2.0f;
        dv *= 2.0f;
      }
      ok = track_level(levels[static_cast<std::size_t>(l)], pt.x / s, pt.y / s, du, dv,
                       params);
      if (!ok) break;
    }
    m.u = du;
    m.v = dv;
    m.valid = ok && std::isfinite(du) && std::isfinite(dv);
    out.matches[static_cast<std::size_t>(pi)] = m;
  }
  return out;
}

DenseFlow densify(const SparseFlow& sparse, int width, int height) {
  DenseFlow flow(width, height);
  std::vector<float> mx, my, mu, mv;
  for (const SparseMatch& m : sparse.matches) {
    if (!m.valid) continue;
    mx.push_back(m.x);
    my.push_back(m.y);
    mu.push_back(m.u);
    mv.push_back(m.v);
  }
  const int nm = static_cast<int>(mx.size());
  if (nm == 0) return flow;  // zero field by contract

  // matches outer, pixels inner: per-pixel accumulators are independent, so
  // the inner loop vectorizes
  parallel_rows(height, [&](int y) {
    const float fy = static_cast<float>(y);
    const std::size_t row = static_cast<std::size_t>(y) * width;
    std::vector<float> su(static_cast<std::size_t>(width), 0.0f);
    std::vector<float> sv(static_cast<std::size_t>(width), 0.0f);
    std::vector<float> sw(static_cast<std::size_t>(width), 0.0f);
    for (int i = 0; i < nm; ++i) {
      const float cx = mx[static_cast<std::size_t>(i)];
      const float dy = fy - my[static_cast<std::size_t>(i)];
      const float dy2p1 = dy * dy + 1.0f;
      const float du = mu[static_cast<std::size_t>(i)];
      const float dv = mv[static_cast<std::size_t>(i)];
      float* pu = su.data();
      float* pv = sv.data();
      float* pw = sw.data();
      for (int x = 0; x < width; ++x) {
        const float dx = static_cast<float>(x) - cx;
        const float w = 1.0f / (dx * dx + dy2p1);
        pu[x] += w * du;
        pv[x] += w * dv;
        pw[x] += w;
      }
    }
    for (int x = 0; x < width; ++x) {
      flow.u[row + x] = su[static_cast<std::size_t>(x)] / sw[static_cast<std::size_t>(x)];
      flow.v[row + x] = sv[static_cast<std::size_t>(x)] / sw[static_cast<std::size_t>(x)];
    }
  });
  return flow;
}

DenseFlow estimate_flow_lk(const Image& img1, const Image& img2,
                           const ShiTomasiParams& st, const LKParams& lk) {
  if (img1.width != img2.width || img1.height != img2.height)
    throw DataError("image dimensions differ");
  const Image gray1 = to_grayscale(img1);
  const Image gray2 = to_grayscale(img2);
  const std::vector<Corner> corners = detect_corners(gray1, st);
  const SparseFlow sparse = lk_track(gray1, gray2, corners, lk);
  return densify(sparse, img1.width, img1.height);
}

}  // namespace midframe
