#include "mirror/metrics.hpp"

#include <array>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace mirror {

namespace {

void check_pair(const Volume& pred, const Volume& gt) {
  if (pred.shape() != gt.shape()) throw std::invalid_argument("mask shapes differ");
  if (!is_binary(pred) || !is_binary(gt)) throw std::invalid_argument("masks must be binary");
}

std::vector<std::array<int64_t, 3>> neighbourhood(int connectivity) {
  if (connectivity != 6 && connectivity != 18 && connectivity != 26) {
    throw std::invalid_argument("connectivity must be 6, 18 or 26");
  }
  std::vector<std::array<int64_t, 3>> offsets;
  for (int64_t dk = -1; dk <= 1; ++dk) {
    for (int64_t dj = -1; dj <= 1; ++dj) {
      for (int64_t di = -1; di <= 1; ++di) {
        const int order = std::abs(static_cast<int>(di)) + std::abs(static_cast<int>(dj)) +
                          std::abs(static_cast<int>(dk));
        if (order == 0) continue;
        if (connectivity == 6 && order > 1) continue;
        if (connectivity == 18 && order > 2) continue;
        offsets.push_back({di, dj, dk});
      }
    }
  }
  return offsets;
}

}  // namespace

double dice_score(const Volume& pred, const Volume& gt) {
  check_pair(pred, gt);
  int64_t p = 0, g = 0, both = 0;
  const auto pv = pred.values();
  const auto gv = gt.values();
  for (size_t n = 0; n < pv.size(); ++n) {
    const bool a = pv[n] != 0.0f;
    const bool b = gv[n] != 0.0f;
    p += a;
    g += b;
    both += a && b;
  }
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

Components connected_components(const Volume& mask, int connectivity) {
  if (!is_binary(mask)) throw std::invalid_argument("connected_components expects a binary mask");
  const auto offsets = neighbourhood(connectivity);
  const auto& s = mask.shape();
  Components out{Volume(s, mask.spacing(), mask.origin()), {}};
  std::vector<int64_t> stack;
  for (int64_t k = 0; k < s[2]; ++k) {
    for (int64_t j = 0; j < s[1]; ++j) {
      for (int64_t i = 0; i < s[0]; ++i) {
        const int64_t seed = mask.index(i, j, k);
        if (mask[seed] == 0.0f || out.labels[seed] != 0.0f) continue;
        const auto label = static_cast<float>(out.sizes.size() + 1);
        int64_t size = 0;
        out.labels[seed] = label;
        stack.push_back(seed);
        while (!stack.empty()) {
          const int64_t n = stack.back();
          stack.pop_back();
          ++size;
          const int64_t ci = n % s[0];
          const int64_t cj = (n / s[0]) % s[1];
          const int64_t ck = n / (s[0] * s[1]);
          for (const auto& o : offsets) {
            const int64_t ni = ci + o[0], nj = cj + o[1], nk = ck + o[2];
            if (ni < 0 || nj < 0 || nk < 0 || ni >= s[0] || nj >= s[1] || nk >= s[2]) continue;
            const int64_t m = mask.index(ni, nj, nk);
            if (mask[m] != 0.0f && out.labels[m] == 0.0f) {
              out.labels[m] = label;
              stack.push_back(m);
            }
          }
        }
        out.sizes.push_back(size);
      }
    }
  }
  return out;
}

namespace {

/// Summed size of components of `a` that share no voxel with `b`.
int64_t untouched_voxels(const Volume& a, const Volume& b, int connectivity) {
  const auto cc = connected_components(a, connectivity);
  std::vector<bool> touched(cc.sizes.size(), false);
  const auto labels = cc.labels.values();
  const auto bv = b.values();
  for (size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] != 0.0f && bv[n] != 0.0f) touched[static_cast<size_t>(labels[n]) - 1] = true;
  }
  int64_t total = 0;
  for (size_t c = 0; c < touched.size(); ++c) {
    if (!touched[c]) total += cc.sizes[c];
  }
  return total;
}

}  // namespace

FalseVolumes fp_fn_volumes(const Volume& pred, const Volume& gt, int connectivity) {
  check_pair(pred, gt);
  if (pred.spacing() != gt.spacing()) throw std::invalid_argument("spacing mismatch between prediction and ground truth");
  const double mm3 = gt.voxel_volume_mm3();
  return {static_cast<double>(untouched_voxels(pred, gt, connectivity)) * mm3 / 1000.0,
          static_cast<double>(untouched_voxels(gt, pred, connectivity)) * mm3 / 1000.0};
}

MetricsRecord compute_metrics(const Volume& pred, const Volume& gt, std::string case_id, int connectivity) {
  const auto fv = fp_fn_volumes(pred, gt, connectivity);
  return {std::move(case_id), dice_score(pred, gt), fv.fpv_ml, fv.fnv_ml};
}

MetricsRecord mean_metrics(const std::vector<MetricsRecord>& records) {
  if (records.empty()) throw std::invalid_argument("no metrics to aggregate");
  MetricsRecord m{"mean", 0.0, 0.0, 0.0};
  for (const auto& r : records) {
    m.dice += r.dice;
    m.fpv_ml += r.fpv_ml;
    m.fnv_ml += r.fnv_ml;
  }
  const auto n = static_cast<double>(records.size());
  m.dice /= n;
  m.fpv_ml /= n;
  m.fnv_ml /= n;
  return m;
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRecord>& records) {
  os << "case_id,dice,fpv_ml,fnv_ml\n";
  os << std::setprecision(10);
  for (const auto& r : records) os << r.case_id << ',' << r.dice << ',' << r.fpv_ml << ',' << r.fnv_ml << '\n';
  if (!records.empty()) {
    const auto m = mean_metrics(records);
    os << m.case_id << ',' << m.dice << ',' << m.fpv_ml << ',' << m.fnv_ml << '\n';
  }
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& records) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_metrics_csv(os, records);
}

}  // namespace mirror
