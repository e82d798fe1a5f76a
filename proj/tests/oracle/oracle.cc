// Copyright 2026 The segbank Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "oracle.h"

#include <algorithm>
#include <cmath>
#include <map>

namespace oracle {

Grid erode(const Grid& m, int k, int t) {
  const int r = k / 2;
  Grid cur = m;
  for (int it = 0; it < t; ++it) {
    Grid next(m.height, m.width);
    for (int y = 0; y < m.height; ++y) {
      for (int x = 0; x < m.width; ++x) {
        bool all = true;
        for (int dy = -r; dy <= r && all; ++dy) {
          for (int dx = -r; dx <= r && all; ++dx) {
            const int yy = y + dy;
            const int xx = x + dx;
            if (yy < 0 || yy >= m.height || xx < 0 || xx >= m.width || cur.at(yy, xx) == 0) {
              all = false;
            }
          }
        }
        next.at(y, x) = all ? 1 : 0;
      }
    }
    cur = next;
  }
  return cur;
}

namespace {

double interval_overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace

std::vector<double> downsample(const Grid& m, int h, int w) {
  const double ch = static_cast<double>(m.height) / h;
  const double cw = static_cast<double>(m.width) / w;
  std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double covered = 0;
      for (int y = 0; y < m.height; ++y) {
        const double oy = interval_overlap(y, y + 1, i * ch, (i + 1) * ch);
        if (oy == 0) continue;
        for (int x = 0; x < m.width; ++x) {
          if (m.at(y, x) == 0) continue;
          covered += oy * interval_overlap(x, x + 1, j * cw, (j + 1) * cw);
        }
      }
      out[static_cast<std::size_t>(i) * w + j] = covered / (ch * cw);
    }
  }
  return out;
}

std::vector<double> pool(const std::vector<std::vector<double>>& features,
                         const std::vector<double>& weights, double eps) {
  const std::size_t d = features.empty() ? 0 : features[0].size();
  std::vector<double> acc(d, 0.0);
  double mass = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    mass += weights[i];
    for (std::size_t k = 0; k < d; ++k) acc[k] += weights[i] * features[i][k];
  }
  for (double& v : acc) v /= (mass + eps);
  double norm = 0;
  for (double v : acc) norm += v * v;
  norm = std::sqrt(norm);
  for (double& v : acc) v /= norm;
  return acc;
}

std::vector<std::size_t> search(const std::vector<std::vector<float>>& bank,
                                const std::vector<float>& query, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    double dot = 0;
    for (std::size_t j = 0; j < query.size(); ++j) {
      dot += static_cast<double>(bank[i][j]) * static_cast<double>(query[j]);
    }
    all.emplace_back(dot, i);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

std::vector<std::size_t> purify(const std::vector<std::vector<float>>& vectors, double alpha_pct) {
  const std::size_t n = vectors.size();
  if (n == 0) return {};
  const std::size_t d = vectors[0].size();
  std::vector<double> mean(d, 0.0);
  for (const auto& v : vectors) {
    for (std::size_t k = 0; k < d; ++k) mean[k] += v[k];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0;
    for (std::size_t k = 0; k < d; ++k) sq += (vectors[i][k] - mean[k]) * (vectors[i][k] - mean[k]);
    dist.emplace_back(std::sqrt(sq), i);
  }
  std::sort(dist.begin(), dist.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  // Integer form of floor(alpha * n / 100) for alpha given in hundredths.
  const auto alpha_hundredths = static_cast<long long>(std::llround(alpha_pct * 100.0));
  const auto drop = static_cast<std::size_t>(alpha_hundredths * static_cast<long long>(n) / 10000);
  std::vector<bool> gone(n, false);
  for (std::size_t i = 0; i < drop; ++i) gone[dist[i].second] = true;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i) {
    if (!gone[i]) kept.push_back(i);
  }
  return kept;
}

VoteOutcome vote(const std::vector<int>& classes, const std::vector<double>& sims) {
  VoteOutcome best;
  int best_count = -1;
  double best_sum = 0;
  for (int c : classes) {
    int count = 0;
    std::vector<double> mine;
    for (std::size_t i = 0; i < classes.size(); ++i) {
      if (classes[i] == c) {
        ++count;
        mine.push_back(sims[i]);
      }
    }
    std::sort(mine.begin(), mine.end());
    double sum = 0;
    for (double s : mine) sum += s;
    const bool better = count > best_count || (count == best_count && sum > best_sum) ||
                        (count == best_count && sum == best_sum && c < best.class_id);
    if (better) {
      best_count = count;
      best_sum = sum;
      best.class_id = c;
      best.confidence = sum / count;
    }
  }
  return best;
}

namespace {

double iou(const Grid& a, const Grid& b) {
  long inter = 0;
  long uni = 0;
  for (std::size_t i = 0; i < a.px.size(); ++i) {
    inter += (a.px[i] && b.px[i]) ? 1 : 0;
    uni += (a.px[i] || b.px[i]) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// True when candidate a is visited before candidate b.
bool before(const std::vector<Candidate>& cands, std::size_t a, std::size_t b) {
  if (cands[a].sem_conf != cands[b].sem_conf) return cands[a].sem_conf > cands[b].sem_conf;
  if (cands[a].objectness != cands[b].objectness) return cands[a].objectness > cands[b].objectness;
  return a < b;
}

std::vector<std::size_t> visit_order(const std::vector<Candidate>& cands) {
  // Selection by repeated scan rather than a sort.
  std::vector<std::size_t> order;
  std::vector<bool> used(cands.size(), false);
  for (std::size_t step = 0; step < cands.size(); ++step) {
    std::size_t pick = cands.size();
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (used[i]) continue;
      if (pick == cands.size() || before(cands, i, pick)) pick = i;
    }
    used[pick] = true;
    order.push_back(pick);
  }
  return order;
}

}  // namespace

std::vector<std::size_t> nms(const std::vector<Candidate>& cands, float tau) {
  std::vector<bool> kept(cands.size(), false);
  for (std::size_t i : visit_order(cands)) {
    bool ok = true;
    for (std::size_t j = 0; j < cands.size(); ++j) {
      if (kept[j] && cands[j].class_id == cands[i].class_id &&
          iou(cands[i].mask, cands[j].mask) >= static_cast<double>(tau)) {
        ok = false;
      }
    }
    kept[i] = ok;
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (kept[i]) out.push_back(i);
  }
  return out;
}

std::vector<int> rasterize(const std::vector<Candidate>& cands, int height, int width,
                           int fill_label) {
  std::vector<int> out(static_cast<std::size_t>(height) * width, fill_label);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      std::size_t owner = cands.size();
      for (std::size_t i = 0; i < cands.size(); ++i) {
        if (cands[i].mask.at(y, x) == 0) continue;
        if (owner == cands.size() || before(cands, i, owner)) owner = i;
      }
      if (owner != cands.size()) {
        out[static_cast<std::size_t>(y) * width + x] = cands[owner].class_id;
      }
    }
  }
  return out;
}

Miou miou(const std::vector<std::vector<int>>& gt, const std::vector<std::vector<int>>& pred,
          int classes, int ignore, int unassigned) {
  Miou r;
  double sum = 0;
  int valid = 0;
  for (int c = 0; c < classes; ++c) {
    long inter = 0;
    long uni = 0;
    for (std::size_t img = 0; img < gt.size(); ++img) {
      for (std::size_t i = 0; i < gt[img].size(); ++i) {
        if (gt[img][i] == ignore) continue;
        const int p = pred[img][i] == unassigned ? 0 : pred[img][i];
        const bool in_gt = gt[img][i] == c;
        const bool in_pred = p == c;
        inter += (in_gt && in_pred) ? 1 : 0;
        uni += (in_gt || in_pred) ? 1 : 0;
      }
    }
    if (uni == 0) {
      r.per_class.push_back(-1.0);
      continue;
    }
    const double v = static_cast<double>(inter) / static_cast<double>(uni);
    r.per_class.push_back(v);
    sum += v;
    ++valid;
  }
  r.mean = valid == 0 ? 0.0 : sum / valid;
  return r;
}

}  // namespace oracle
