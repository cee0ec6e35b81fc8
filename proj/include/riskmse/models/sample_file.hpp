#pragma once

#include <algorithm>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "riskmse/model.hpp"

namespace riskmse {

// Empirical model built from paired draws of (X, Y). The observation must be
// scalar; it is split into equal-count bins and the conditional law within a
// bin is the empirical distribution of the matching states.
namespace sample_file_detail {

struct Dataset {
  std::vector<Vec> x;      // state rows
  std::vector<double> y;   // scalar observations
};

inline Dataset parse_csv(std::istream& in) {
  Dataset data;
  std::string line;
  if (!std::getline(in, line)) throw IoError("sample_file: empty input");
  std::vector<std::string> names;
  {
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) names.push_back(cell);
  }
  int n = 0, m = 0;
  for (const auto& name : names) {
    if (name.rfind("x_", 0) == 0 && m == 0)
      ++n;
    else if (name.rfind("y_", 0) == 0)
      ++m;
    else
      throw IoError("sample_file: header must list x_1..x_n then y_1..y_m, got '" + name + "'");
  }
  if (n == 0 || m == 0) throw IoError("sample_file: header needs at least one x and one y column");
  if (m != 1) throw InvalidInput("sample_file: only scalar observations are supported (one y column)");

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    Vec vals;
    while (std::getline(row, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw IoError("sample_file: bad number at line " + std::to_string(line_no));
      }
      if (used != cell.size()) throw IoError("sample_file: bad number at line " + std::to_string(line_no));
      vals.push_back(v);
    }
    if (static_cast<int>(vals.size()) != n + m)
      throw IoError("sample_file: wrong column count at line " + std::to_string(line_no));
    if (!all_finite(vals)) throw IoError("sample_file: non-finite value at line " + std::to_string(line_no));
    data.x.emplace_back(vals.begin(), vals.begin() + n);
    data.y.push_back(vals[static_cast<std::size_t>(n)]);
  }
  if (data.y.empty()) throw IoError("sample_file: no data rows");
  return data;
}

class Model final : public GenerativeModel::Impl {
 public:
  Model(Dataset data, int bins) : y_sorted_(data.y) {
    const std::size_t rows = data.y.size();
    if (bins < 1) throw InvalidInput("sample_file: bins must be positive");
    if (rows < 2 * static_cast<std::size_t>(bins))
      throw InvalidInput("sample_file: needs at least two rows per bin");
    dim_ = static_cast<int>(data.x.front().size());

    std::vector<std::size_t> order(rows);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return data.y[a] < data.y[b]; });
    std::sort(y_sorted_.begin(), y_sorted_.end());

    const auto indices = multi_indices_up_to(dim_, kMaxMomentDegree);
    summaries_.reserve(static_cast<std::size_t>(bins));
    edges_.reserve(static_cast<std::size_t>(bins) - 1);
    for (int b = 0; b < bins; ++b) {
      const std::size_t lo = rows * static_cast<std::size_t>(b) / static_cast<std::size_t>(bins);
      const std::size_t hi = rows * static_cast<std::size_t>(b + 1) / static_cast<std::size_t>(bins);
      RawMomentTable table(dim_);
      for (const auto& q : indices) {
        double acc = 0.0;
        for (std::size_t r = lo; r < hi; ++r) {
          double term = 1.0;
          const Vec& xr = data.x[order[r]];
          for (int c = 0; c < dim_; ++c)
            for (int p = 0; p < q[static_cast<std::size_t>(c)]; ++p) term *= xr[static_cast<std::size_t>(c)];
          acc += term;
        }
        table.set(q, acc / static_cast<double>(hi - lo));
      }
      summaries_.push_back(summary_from_raw_table(table));
      if (b + 1 < bins) {
        const double left = data.y[order[hi - 1]];
        const double right = data.y[order[hi]];
        edges_.push_back(0.5 * (left + right));
      }
    }
  }

  std::string name() const override { return "sample_file"; }
  int state_dim() const override { return dim_; }
  int obs_dim() const override { return 1; }

  Vec sample_observation(Sampler& rng) const override {
    const std::size_t idx =
        std::min(y_sorted_.size() - 1,
                 static_cast<std::size_t>(rng.u01() * static_cast<double>(y_sorted_.size())));
    return {y_sorted_[idx]};
  }

  PosteriorSummary posterior(const Vec& y_vec) const override {
    const double y = y_vec[0];
    const auto it = std::upper_bound(edges_.begin(), edges_.end(), y);
    const std::size_t bin = static_cast<std::size_t>(it - edges_.begin());
    return summaries_[bin];
  }

 private:
  int dim_ = 0;
  std::vector<double> y_sorted_;
  std::vector<double> edges_;
  std::vector<PosteriorSummary> summaries_;
};

}  // namespace sample_file_detail

inline GenerativeModel make_sample_file(const std::string& path, int bins = 64) {
  std::ifstream in(path);
  if (!in) throw IoError("sample_file: cannot open " + path);
  auto data = sample_file_detail::parse_csv(in);
  return GenerativeModel(std::make_shared<sample_file_detail::Model>(std::move(data), bins));
}

inline GenerativeModel make_sample_file_from_data(std::vector<Vec> x, std::vector<double> y,
                                                  int bins = 64) {
  if (x.size() != y.size()) throw InvalidInput("sample_file: x/y row count mismatch");
  sample_file_detail::Dataset data;
  data.x = std::move(x);
  data.y = std::move(y);
  return GenerativeModel(std::make_shared<sample_file_detail::Model>(std::move(data), bins));
}

}  // namespace riskmse
