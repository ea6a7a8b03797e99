#include "mclv/tour.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <thread>

namespace mclv {

TourConfig TourConfig::fixed(std::size_t k, GibbsScan scan) {
  if (k == 0) throw std::invalid_argument("TourConfig: K must be positive");
  TourConfig c;
  c.k_max = k;
  c.k_dyn_cap = std::max(c.k_dyn_cap, k);
  c.scan = scan;
  return c;
}

TourConfig TourConfig::dynamic(std::size_t cap, GibbsScan scan) {
  if (cap == 0) throw std::invalid_argument("TourConfig: cap must be positive");
  TourConfig c;
  c.k_max.reset();
  c.k_dyn_cap = cap;
  c.scan = scan;
  return c;
}

StatisticSpec StatisticSpec::unit() {
  StatisticSpec s;
  s.kind = StatisticKind::UnitF1;
  s.dimension = 1;
  s.sup_norm = 1.0;
  s.accumulate = [](const JointState&, Eigen::Ref<Eigen::VectorXd> acc) { acc(0) += 1.0; };
  return s;
}

StatisticSpec StatisticSpec::energy_gradient(Eigen::Index n_visible, Eigen::Index n_hidden) {
  StatisticSpec s;
  s.kind = StatisticKind::EnergyGradient;
  s.dimension = n_visible * n_hidden + n_visible + n_hidden;
  // ||(v h', v, h)||_1 peaks at the all-ones state.
  s.sup_norm = static_cast<double>(s.dimension);
  s.accumulate = [n_visible, n_hidden](const JointState& x, Eigen::Ref<Eigen::VectorXd> acc) {
    const Eigen::Index bias_offset = n_visible * n_hidden;
    std::vector<Eigen::Index> on_visible;
    on_visible.reserve(static_cast<std::size_t>(n_visible));
    for (Eigen::Index i = 0; i < n_visible; ++i) {
      if (x.visible.get(static_cast<std::size_t>(i))) {
        on_visible.push_back(i);
        acc(bias_offset + i) -= 1.0;
      }
    }
    for (Eigen::Index j = 0; j < n_hidden; ++j) {
      if (!x.hidden.get(static_cast<std::size_t>(j))) continue;
      acc(bias_offset + n_visible + j) -= 1.0;
      for (auto i : on_visible) acc(j * n_visible + i) -= 1.0;
    }
  };
  return s;
}

StatisticSpec StatisticSpec::custom(Eigen::Index dimension, std::function<Eigen::VectorXd(const JointState&)> f,
                                    double sup_norm) {
  StatisticSpec s;
  s.kind = StatisticKind::Custom;
  s.dimension = dimension;
  s.sup_norm = sup_norm;
  s.accumulate = [f = std::move(f)](const JointState& x, Eigen::Ref<Eigen::VectorXd> acc) { acc += f(x); };
  return s;
}

TourRecord run_tour(const Rbm& params, const StoppingSet& stopping, const TourConfig& config,
                    const std::vector<StatisticSpec>& stats, Rng& rng) {
  std::size_t index = 0;
  const JointState start = stopping.sample_start(params, rng, index);
  TourRecord rec = run_tour_from(start, params, stopping, config, stats, rng);
  rec.start_index = index;
  return rec;
}

TourRecord run_tour_from(const JointState& start, const Rbm& params, const StoppingSet& stopping,
                         const TourConfig& config, const std::vector<StatisticSpec>& stats, Rng& rng) {
  TourRecord rec;
  rec.stat_sums.reserve(stats.size());
  for (const auto& s : stats) rec.stat_sums.push_back(Eigen::VectorXd::Zero(s.dimension));
  if (auto idx = stopping.index_of(start.hidden)) rec.start_index = *idx;

  const std::size_t limit = config.step_limit();
  JointState x = start;
  for (std::size_t t = 1;; ++t) {
    for (std::size_t i = 0; i < stats.size(); ++i) stats[i].accumulate(x, rec.stat_sums[i]);
    gibbs_update(x, params, config.scan, rng);
    if (stopping.contains(x.hidden)) {
      rec.length = t;
      rec.completed = true;
      rec.returned_to_start = x.hidden == start.hidden;
      break;
    }
    if (t == limit) {
      rec.length = t;
      rec.capped = config.is_dynamic();
      break;
    }
  }
  rec.exit_state = std::move(x);
  return rec;
}

TailSummary summarize(const std::vector<TourRecord>& records) {
  TailSummary s;
  s.tours = records.size();
  std::size_t max_len = 0;
  double length_sum = 0.0;
  for (const auto& r : records) {
    max_len = std::max(max_len, r.length);
    if (r.completed) {
      ++s.completed;
      length_sum += static_cast<double>(r.length);
    } else if (r.capped) {
      ++s.capped;
    } else {
      ++s.truncated;
    }
  }
  s.completed_by_length.assign(max_len + 1, 0);
  // beyond[k] = number of tours known to have xi > k.
  std::vector<std::size_t> ended_at(max_len + 2, 0);
  for (const auto& r : records) {
    if (r.completed) {
      ++s.completed_by_length[r.length];
      ++ended_at[r.length];
    } else {
      // A cut-off tour of length L is known to satisfy xi > L.
      if (r.length + 1 <= max_len) ++ended_at[r.length + 1];
    }
  }
  s.survival.assign(max_len + 1, 0.0);
  std::size_t remaining = s.tours;
  for (std::size_t k = 0; k <= max_len; ++k) {
    remaining -= ended_at[k];
    s.survival[k] = s.tours ? static_cast<double>(remaining) / static_cast<double>(s.tours) : 0.0;
  }
  s.xi_hat = s.completed ? length_sum / static_cast<double>(s.completed) : std::numeric_limits<double>::quiet_NaN();
  return s;
}

namespace {

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

BatchResult run_batch(const Rbm& params, const StoppingSet& stopping, const TourConfig& config,
                      const std::vector<StatisticSpec>& stats, std::size_t tours, Rng& rng, std::size_t threads) {
  if (tours == 0) throw std::invalid_argument("run_batch: need at least one tour");
  BatchResult out;
  out.stale_stopping_set = !stopping.built_for(params);
  out.records.resize(tours);
  const std::uint64_t base = rng();
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      Rng tour_rng(mix_seed(base, r));
      out.records[r] = run_tour(params, stopping, config, stats, tour_rng);
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, tours);
  if (threads == 1) {
    work(0, tours);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (tours + threads - 1) / threads;
    for (std::size_t w = 0; w < threads; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(tours, begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (auto& t : pool) t.join();
  }
  out.tail = summarize(out.records);
  return out;
}

std::optional<TailFit> fit_geometric_tail(const TailSummary& tail, std::size_t k_lo) {
  std::size_t long_completed = 0;
  for (std::size_t k = 2; k < tail.completed_by_length.size(); ++k) long_completed += tail.completed_by_length[k];
  if (long_completed < 100) return std::nullopt;

  constexpr double kMinCount = 30.0;
  const double n = static_cast<double>(tail.tours);
  std::size_t k_hi = 0;
  for (std::size_t k = 1; k < tail.survival.size(); ++k) {
    if (tail.survival[k] * n + 0.5 < kMinCount) break;
    k_hi = k;
  }
  if (k_lo == 0) k_lo = 1;
  if (k_hi < k_lo + 1) return std::nullopt;

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double points = static_cast<double>(k_hi - k_lo + 1);
  for (std::size_t k = k_lo; k <= k_hi; ++k) {
    const double x = static_cast<double>(k);
    const double y = std::log(tail.survival[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  TailFit fit;
  fit.slope = (points * sxy - sx * sy) / (points * sxx - sx * sx);
  fit.alpha = std::clamp(std::exp(fit.slope), std::numeric_limits<double>::min(), 1.0 - 1e-12);
  fit.k_lo = k_lo;
  fit.k_hi = k_hi;
  return fit;
}

std::optional<TailFit> fit_geometric_tail(const std::vector<TourRecord>& records, std::size_t k_lo) {
  return fit_geometric_tail(summarize(records), k_lo);
}

void assign_start_labels(std::vector<TourRecord>& records, const StoppingSet& stopping,
                         const std::vector<int>& labels) {
  for (auto& r : records) {
    const auto source = stopping.source_example(r.start_index);
    if (source && *source < labels.size()) r.start_label = labels[*source];
  }
}

void write_ccdf_csv(std::ostream& out, const TailSummary& tail) {
  out << "k,count,p_gt_k\n";
  out.precision(12);
  for (std::size_t k = 1; k < tail.survival.size(); ++k) {
    const std::size_t count = k < tail.completed_by_length.size() ? tail.completed_by_length[k] : 0;
    out << k << ',' << count << ',' << tail.survival[k] << '\n';
  }
}

}  // namespace mclv
