#pragma once

// GLS phylogenetic statistics: ancestral mean, Blomberg's K and its
// permutation test, phylogenetic Pearson correlation, Brownian-motion trait
// simulation, and aggregation over posterior tree samples.

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "phyloload/errors.hpp"
#include "phyloload/phylotree.hpp"
#include "phyloload/rng.hpp"
#include "phyloload/text.hpp"

namespace phyloload {

class TraitVector {
 public:
  TraitVector() = default;
  TraitVector(std::vector<std::string> taxa, std::vector<double> values)
      : taxa_(std::move(taxa)), values_(std::move(values)) {
    if (taxa_.size() != values_.size()) throw InputError("trait vector: taxa and values differ in length");
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < taxa_.size(); ++i) {
      if (!seen.insert(taxa_[i]).second) throw InputError("trait vector: duplicate taxon '" + taxa_[i] + "'");
      if (!std::isfinite(values_[i])) throw InputError("trait vector: non-finite value for '" + taxa_[i] + "'");
    }
  }

  const std::vector<std::string>& taxa() const { return taxa_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  Eigen::Map<const Eigen::VectorXd> vec() const {
    return {values_.data(), static_cast<Eigen::Index>(values_.size())};
  }

  TraitVector affine(double scale, double shift) const {
    std::vector<double> v(values_);
    for (auto& e : v) e = scale * e + shift;
    return {taxa_, std::move(v)};
  }

 private:
  std::vector<std::string> taxa_;
  std::vector<double> values_;
};

struct GlsOptions {
  // Add eps * mean(diag C) * I when C does not factor, instead of failing.
  bool jitter = false;
};

inline constexpr double kJitterEpsilon = 1e-8;

// Cholesky factorization of C with the jitter policy applied, plus the
// quantities every GLS statistic shares. No explicit inverse is formed.
class GlsModel {
 public:
  explicit GlsModel(const PhyloCovariance& cov, const GlsOptions& opts = {}) : taxa_(cov.taxa) {
    const Eigen::MatrixXd& c = cov.matrix;
    if (c.rows() != c.cols() || static_cast<std::size_t>(c.rows()) != taxa_.size())
      throw InputError("covariance matrix does not match its taxa");
    n_ = c.rows();
    if (n_ < 2) throw InputError("GLS needs at least 2 taxa");
    const double mean_diag = c.diagonal().mean();
    if (!(mean_diag > 0.0)) throw SingularCovarianceError("covariance matrix has zero diagonal");
    if (!factor(c, mean_diag)) {
      if (!opts.jitter)
        throw SingularCovarianceError("covariance matrix is singular; rerun with --jitter to regularize");
      const double eps = kJitterEpsilon * mean_diag;
      Eigen::MatrixXd cj = c;
      cj.diagonal().array() += eps;
      if (!factor(cj, mean_diag))
        throw SingularCovarianceError("covariance matrix is singular even after jitter");
      jittered_ = true;
      warn("covariance matrix singular; added " + text::format_double(eps) + " to its diagonal");
      trace_ = cj.trace();
    } else {
      trace_ = c.trace();
    }
    cinv_one_ = llt_.solve(Eigen::VectorXd::Ones(n_));
    one_cinv_one_ = cinv_one_.sum();
  }

  const std::vector<std::string>& taxa() const { return taxa_; }
  Eigen::Index size() const { return n_; }
  bool jittered() const { return jittered_; }

  // GLS estimate of the root state, (1' C^-1 x) / (1' C^-1 1).
  double mean(const Eigen::Ref<const Eigen::VectorXd>& x) const { return cinv_one_.dot(x) / one_cinv_one_; }

  // r' C^-1 s through the triangular factor.
  double inner(const Eigen::Ref<const Eigen::VectorXd>& r, const Eigen::Ref<const Eigen::VectorXd>& s) const {
    const Eigen::VectorXd a = llt_.matrixL().solve(r);
    const Eigen::VectorXd b = llt_.matrixL().solve(s);
    return a.dot(b);
  }

  double quad(const Eigen::Ref<const Eigen::VectorXd>& r) const {
    return llt_.matrixL().solve(r).squaredNorm();
  }

  // BM expectation of the MSE0 / MSE ratio: (tr C - n / 1'C^-1 1) / (n - 1).
  double expected_ratio() const {
    return (trace_ - static_cast<double>(n_) / one_cinv_one_) / static_cast<double>(n_ - 1);
  }

  // GLS mean squared error of x about its GLS mean.
  double gls_mse(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const Eigen::VectorXd r = x.array() - mean(x);
    return quad(r) / static_cast<double>(n_ - 1);
  }

 private:
  // Pivots below this fraction of the mean diagonal count as singular.
  static constexpr double kPivotTolerance = 1e-12;

  bool factor(const Eigen::MatrixXd& c, double mean_diag) {
    llt_.compute(c);
    if (llt_.info() != Eigen::Success) return false;
    const auto pivots = llt_.matrixLLT().diagonal();
    return (pivots.array().square() > kPivotTolerance * mean_diag).all();
  }

  std::vector<std::string> taxa_;
  Eigen::Index n_ = 0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd cinv_one_;
  double one_cinv_one_ = 0.0;
  double trace_ = 0.0;
  bool jittered_ = false;
};

namespace detail {

inline void require_aligned(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a != b) throw InputError("trait taxa are not aligned with the covariance matrix");
}

inline void require_nonconstant(const TraitVector& x) {
  const auto [lo, hi] = std::minmax_element(x.values().begin(), x.values().end());
  if (lo == x.values().end() || *lo == *hi) throw DegenerateError("degenerate trait: all values are equal");
}

}  // namespace detail

inline double gls_mean(const TraitVector& x, const GlsModel& model) {
  detail::require_aligned(x.taxa(), model.taxa());
  return model.mean(x.vec());
}

inline double gls_mean(const TraitVector& x, const PhyloCovariance& cov, const GlsOptions& opts = {}) {
  return gls_mean(x, GlsModel(cov, opts));
}

// Blomberg's K: the observed ratio of raw to GLS mean squared error, divided
// by its expectation under Brownian motion on the tree.
inline double blomberg_k(const TraitVector& x, const GlsModel& model) {
  detail::require_aligned(x.taxa(), model.taxa());
  detail::require_nonconstant(x);
  const Eigen::VectorXd r = x.vec().array() - model.mean(x.vec());
  const double mse0 = r.squaredNorm();
  const double mse = model.quad(r);
  if (!(mse > 0.0)) throw DegenerateError("degenerate trait: zero GLS variance");
  return (mse0 / mse) / model.expected_ratio();
}

inline double blomberg_k(const TraitVector& x, const PhyloCovariance& cov, const GlsOptions& opts = {}) {
  return blomberg_k(x, GlsModel(cov, opts));
}

inline constexpr int kMinPermutations = 99;

// Add-one permutation p-value for K: the share of tip permutations whose GLS
// MSE is at most the observed one. `stream` selects an independent random
// stream under the same seed (the tree index when aggregating).
inline double k_permutation_test(const TraitVector& x, const GlsModel& model, int n_perm, std::uint64_t seed,
                                 std::uint32_t stream = 0) {
  if (n_perm < kMinPermutations)
    throw InputError("permutation test needs at least " + std::to_string(kMinPermutations) + " permutations");
  detail::require_aligned(x.taxa(), model.taxa());
  detail::require_nonconstant(x);
  const double observed = model.gls_mse(x.vec());
  const double threshold = observed * (1.0 + 1e-12);
  CounterRng rng(seed, stream, 0x5045524Du);  // "PERM"
  std::vector<double> shuffled(x.values());
  int hits = 0;
  for (int i = 0; i < n_perm; ++i) {
    rng.shuffle(shuffled);
    const Eigen::Map<const Eigen::VectorXd> v(shuffled.data(), static_cast<Eigen::Index>(shuffled.size()));
    if (model.gls_mse(v) <= threshold) ++hits;
  }
  return static_cast<double>(1 + hits) / static_cast<double>(n_perm + 1);
}

inline double k_permutation_test(const TraitVector& x, const PhyloCovariance& cov, int n_perm, std::uint64_t seed,
                                 const GlsOptions& opts = {}) {
  return k_permutation_test(x, GlsModel(cov, opts), n_perm, seed);
}

// Phylogenetic Pearson correlation from the GLS evolutionary covariances.
inline double phylo_correlation(const TraitVector& x, const TraitVector& y, const GlsModel& model) {
  detail::require_aligned(x.taxa(), model.taxa());
  detail::require_aligned(y.taxa(), model.taxa());
  detail::require_nonconstant(x);
  detail::require_nonconstant(y);
  const Eigen::VectorXd rx = x.vec().array() - model.mean(x.vec());
  const Eigen::VectorXd ry = y.vec().array() - model.mean(y.vec());
  const double df = static_cast<double>(model.size() - 1);
  const double rxx = model.quad(rx) / df;
  const double ryy = model.quad(ry) / df;
  if (!(rxx > 0.0) || !(ryy > 0.0)) throw DegenerateError("degenerate trait: zero evolutionary variance");
  const double rxy = model.inner(rx, ry) / df;
  const double r = rxy / std::sqrt(rxx * ryy);
  if (std::abs(r) > 1.0 + 1e-12) throw std::logic_error("phylogenetic correlation outside [-1, 1]");
  return std::clamp(r, -1.0, 1.0);
}

inline double phylo_correlation(const TraitVector& x, const TraitVector& y, const PhyloCovariance& cov,
                                const GlsOptions& opts = {}) {
  return phylo_correlation(x, y, GlsModel(cov, opts));
}

// Two-sided p for a correlation via t = r sqrt((n-2)/(1-r^2)) on n-2 df.
inline double correlation_p(double mean_r, std::size_t n) {
  if (n < 3) throw InputError("correlation p-value needs at least 3 taxa");
  if (!std::isfinite(mean_r) || std::abs(mean_r) > 1.0) throw InputError("correlation outside [-1, 1]");
  if (std::abs(mean_r) == 1.0) {
    warn("|r| = 1; reporting p = 0");
    return 0.0;
  }
  const double df = static_cast<double>(n - 2);
  const double t = mean_r * std::sqrt(df / (1.0 - mean_r * mean_r));
  const boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

namespace detail {

// S with S S' = a for symmetric PSD `a`: Cholesky when it succeeds, otherwise
// an eigen square root with tiny negative eigenvalues clipped.
inline Eigen::MatrixXd symmetric_factor(const Eigen::MatrixXd& a) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) {
    const double scale = std::max(1.0, a.diagonal().cwiseAbs().maxCoeff());
    if ((llt.matrixLLT().diagonal().array().square() > 1e-12 * scale).all()) return llt.matrixL();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

inline void require_psd(const Eigen::MatrixXd& a, const char* what) {
  if (a.rows() != a.cols() || a.rows() == 0) throw InputError(std::string(what) + " must be square");
  if (!a.allFinite()) throw InputError(std::string(what) + " has non-finite entries");
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()))
    throw InputError(std::string(what) + " is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale)
    throw InputError(std::string(what) + " is not positive semidefinite");
}

}  // namespace detail

// Draws tip values of m traits under multivariate Brownian motion: the
// stacked tip vector is normal with mean root_state (per trait) and
// covariance kron(rate, C). C is factored once at construction.
class BmSimulator {
 public:
  BmSimulator(const Phylogeny& tree, const Eigen::MatrixXd& rate, const Eigen::VectorXd& root_state)
      : BmSimulator(vcv(tree), rate, root_state) {}

  BmSimulator(const PhyloCovariance& cov, const Eigen::MatrixXd& rate, const Eigen::VectorXd& root_state)
      : taxa_(cov.taxa), root_(root_state) {
    detail::require_psd(rate, "rate matrix");
    if (root_state.size() != rate.rows()) throw InputError("root state length does not match the rate matrix");
    tree_factor_ = detail::symmetric_factor(cov.matrix);
    rate_factor_ = detail::symmetric_factor(rate);
  }

  std::size_t num_traits() const { return static_cast<std::size_t>(root_.size()); }
  const std::vector<std::string>& taxa() const { return taxa_; }

  // One draw as an n x m matrix (taxa by traits).
  Eigen::MatrixXd draw_matrix(CounterRng& rng) const {
    const Eigen::Index n = tree_factor_.rows(), m = rate_factor_.rows();
    Eigen::MatrixXd z(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) z(i, j) = rng.normal();
    Eigen::MatrixXd x = tree_factor_ * z * rate_factor_.transpose();
    x.rowwise() += root_.transpose();
    return x;
  }

  std::vector<TraitVector> draw(CounterRng& rng) const {
    const Eigen::MatrixXd x = draw_matrix(rng);
    std::vector<TraitVector> out;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      std::vector<double> col(static_cast<std::size_t>(x.rows()));
      for (Eigen::Index i = 0; i < x.rows(); ++i) col[static_cast<std::size_t>(i)] = x(i, j);
      out.emplace_back(taxa_, std::move(col));
    }
    return out;
  }

 private:
  std::vector<std::string> taxa_;
  Eigen::VectorXd root_;
  Eigen::MatrixXd tree_factor_;
  Eigen::MatrixXd rate_factor_;
};

inline constexpr std::uint32_t kSimulationStream = 0x53494Du;  // "SIM"

// Replicate `replicate` of a BM simulation under `seed`.
inline std::vector<TraitVector> simulate_bm(const Phylogeny& tree, const Eigen::MatrixXd& rate,
                                            const Eigen::VectorXd& root_state, std::uint64_t seed,
                                            std::uint32_t replicate = 0) {
  CounterRng rng(seed, replicate, kSimulationStream);
  return BmSimulator(tree, rate, root_state).draw(rng);
}

// ---------------------------------------------------------------------------
// Aggregation over tree samples

struct SampleSummary {
  std::vector<double> values;  // per tree, in sample order
  double mean = 0.0;
  double sd = 0.0;    // sample standard deviation; 0 for a single tree
  double lo95 = 0.0;  // 2.5th percentile
  double hi95 = 0.0;  // 97.5th percentile
};

// Linear-interpolation quantile of sorted data (R's default, type 7).
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw InputError("quantile of empty data");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline SampleSummary summarize(std::vector<double> values) {
  if (values.empty()) throw InputError("no values to summarize");
  SampleSummary s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / (n - 1.0));
  }
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  s.lo95 = quantile_sorted(sorted, 0.025);
  s.hi95 = quantile_sorted(sorted, 0.975);
  s.values = std::move(values);
  return s;
}

struct SignalResult {
  SampleSummary k;
  std::optional<double> p_perm;  // mean per-tree permutation p, when requested
};

struct CorrResult {
  SampleSummary r;
  double p = 1.0;
};

struct AggregateOptions {
  GlsOptions gls;
  std::uint64_t seed = 0;
  int n_perm = 0;          // 0 disables the permutation test
  unsigned threads = 0;    // 0: PHYLOLOAD_THREADS, else hardware concurrency
};

inline unsigned resolve_threads(unsigned requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PHYLOLOAD_THREADS")) {
    if (auto v = text::parse_int(env); v && *v > 0) return static_cast<unsigned>(*v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. If any call throws,
// the exception from the lowest index is rethrown, independent of scheduling.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// The covariance of `tree` pruned to the data taxa, indexed by the data
// names. Taxon names are matched after normalize_taxon.
inline PhyloCovariance covariance_for_taxa(const Phylogeny& tree, const std::vector<std::string>& taxa,
                                           std::size_t tree_index = 0) {
  const auto rec = reconcile_taxa(taxa, tree.tip_labels());
  if (!rec.complete()) {
    std::string msg = "tree " + std::to_string(tree_index) + " lacks taxa:";
    for (const auto& t : rec.data_only) msg += " '" + t + "'";
    throw InputError(msg);
  }
  std::set<std::string> keep;
  std::vector<std::string> labels;
  for (const auto& [data, label] : rec.matched) {
    keep.insert(label);
    labels.push_back(label);
  }
  PhyloCovariance cov = vcv(prune(tree, keep), labels);
  cov.taxa = taxa;
  return cov;
}

// Evaluates stat(tree_index, covariance) on every tree of the sample.
template <typename Stat>
std::vector<double> aggregate_over_sample(const TreeSample& sample, const std::vector<std::string>& taxa,
                                          Stat&& stat, unsigned threads = 0) {
  if (sample.empty()) throw InputError("no trees");
  std::vector<double> out(sample.size());
  parallel_for(sample.size(), resolve_threads(threads), [&](std::size_t i) {
    out[i] = stat(i, covariance_for_taxa(sample[i], taxa, i));
  });
  return out;
}

inline SignalResult aggregate_signal(const TreeSample& sample, const TraitVector& x,
                                     const AggregateOptions& opts = {}) {
  detail::require_nonconstant(x);
  std::vector<double> pvals(sample.size(), 0.0);
  auto ks = aggregate_over_sample(
      sample, x.taxa(),
      [&](std::size_t i, const PhyloCovariance& cov) {
        const GlsModel model(cov, opts.gls);
        if (opts.n_perm > 0)
          pvals[i] = k_permutation_test(x, model, opts.n_perm, opts.seed, static_cast<std::uint32_t>(i));
        return blomberg_k(x, model);
      },
      opts.threads);
  SignalResult res{summarize(std::move(ks)), std::nullopt};
  if (opts.n_perm > 0)
    res.p_perm = std::accumulate(pvals.begin(), pvals.end(), 0.0) / static_cast<double>(pvals.size());
  return res;
}

inline CorrResult aggregate_correlation(const TreeSample& sample, const TraitVector& x, const TraitVector& y,
                                        const AggregateOptions& opts = {}) {
  if (x.taxa() != y.taxa()) throw InputError("trait vectors have different taxa");
  auto rs = aggregate_over_sample(
      sample, x.taxa(),
      [&](std::size_t, const PhyloCovariance& cov) { return phylo_correlation(x, y, GlsModel(cov, opts.gls)); },
      opts.threads);
  CorrResult res{summarize(std::move(rs)), 1.0};
  res.p = correlation_p(res.r.mean, x.size());
  return res;
}

}  // namespace phyloload
