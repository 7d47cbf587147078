#include "kinchain/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

#include "kinchain/errors.hpp"

namespace kinchain {
namespace {

constexpr double kArmijo = 1e-4;
constexpr double kWolfe = 0.9;
constexpr int kMaxLineSearch = 60;

bool converged(double previous, double current, double tol) {
  if (current == 0.0) return true;
  return std::abs(previous - current) <= tol * std::max(std::abs(previous), 1e-300);
}

AnchorSet effective_anchors(const AnchorSet& anchors, const FitConfig& config) {
  AnchorSet out = anchors;
  if (config.tau) out.temperature = *config.tau;
  out.validate();
  return out;
}

// Objective of one frame's stage-1 fit.
class FrameObjective {
 public:
  FrameObjective(const Mesh& mesh, const AnchorSet& anchors, const FrameObservation& frame,
                 const FitConfig& config, int frame_index)
      : mesh_(mesh), anchors_(anchors), frame_(frame), weights_(config.loss_weights) {
    if (weights_.cycle > 0.0)
      samples_ = cycle_samples(frame, config.cycle_samples,
                               config.seed + static_cast<std::uint64_t>(frame_index));
  }

  LossTerms value(std::span<const RigidTransform> t) const {
    LossTerms terms;
    if (weights_.recon > 0.0) terms.recon = reconstruction_loss(mesh_, anchors_, t, frame_);
    if (weights_.cycle > 0.0)
      terms.cycle = cycle_consistency_loss(samples_, anchors_, t, frame_.root_pose);
    terms.total = weights_.recon * terms.recon + weights_.cycle * terms.cycle;
    return terms;
  }

  Eigen::VectorXd gradient(std::span<const RigidTransform> t) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(6 * t.size()));
    if (weights_.recon > 0.0)
      g += weights_.recon * reconstruction_loss_gradient(mesh_, anchors_, t, frame_).gradient;
    if (weights_.cycle > 0.0)
      g += weights_.cycle * cycle_consistency_gradient(samples_, anchors_, t, frame_.root_pose).gradient;
    return g;
  }

  const std::vector<Vec3>& samples() const { return samples_; }

 private:
  const Mesh& mesh_;
  const AnchorSet& anchors_;
  const FrameObservation& frame_;
  LossWeights weights_;
  std::vector<Vec3> samples_;
};

std::vector<double> scaled(const Eigen::VectorXd& g, Eigen::Index offset, Eigen::Index count,
                           double factor) {
  std::vector<double> out(static_cast<std::size_t>(count));
  for (Eigen::Index k = 0; k < count; ++k) out[static_cast<std::size_t>(k)] = factor * g[offset + k];
  return out;
}

// Limited-memory inverse-Hessian estimate (two-loop recursion).
class Lbfgs {
 public:
  bool empty() const { return s_.empty(); }
  void clear() {
    s_.clear();
    y_.clear();
  }

  void push(Eigen::VectorXd s, Eigen::VectorXd y) {
    const double sy = s.dot(y);
    if (!(sy > 1e-12 * s.norm() * y.norm())) return;  // keeps the estimate positive definite
    if (s_.size() == kMemory) {
      s_.erase(s_.begin());
      y_.erase(y_.begin());
    }
    s_.push_back(std::move(s));
    y_.push_back(std::move(y));
  }

  Eigen::VectorXd direction(const Eigen::VectorXd& g) const {
    Eigen::VectorXd q = g;
    std::vector<double> a(s_.size());
    for (std::size_t i = s_.size(); i-- > 0;) {
      a[i] = s_[i].dot(q) / y_[i].dot(s_[i]);
      q -= a[i] * y_[i];
    }
    q *= s_.back().dot(y_.back()) / y_.back().squaredNorm();
    for (std::size_t i = 0; i < s_.size(); ++i) {
      const double b = y_[i].dot(q) / y_[i].dot(s_[i]);
      q += (a[i] - b) * s_[i];
    }
    return -q;
  }

 private:
  static constexpr std::size_t kMemory = 10;
  std::vector<Eigen::VectorXd> s_;
  std::vector<Eigen::VectorXd> y_;
};

// One parameter block moved by quasi-Newton steps under a weak Wolfe line
// search (bisection and expansion), falling back to the negative gradient when
// no curvature is known or a direction fails. The Wolfe bracket rather than
// plain backtracking matters on the Chamfer term, whose minimum is a kink.
// Curvature pairs are taken between successive calls, so moves of other blocks
// in between only perturb the estimate.
class BlockDescent {
 public:
  explicit BlockDescent(double initial_step) : gradient_step_(initial_step) {}

  // Lowers terms.total by moving `current` along this block's tangent
  // coordinates; false when no descent step exists.
  template <typename State, typename Value, typename Gradient, typename Advance>
  bool step(State& current, LossTerms& terms, double& taken, int iteration, const std::string& what,
            Value&& value, Gradient&& gradient, Advance&& advance) {
    const Eigen::VectorXd g = gradient(current);
    if (!g.allFinite()) throw FitDivergedError(what + ": non-finite gradient", iteration);
    if (g.squaredNorm() == 0.0) return false;
    if (last_step_.size() == g.size()) memory_.push(last_step_, g - last_gradient_);
    last_step_.resize(0);

    for (;;) {
      const bool quasi_newton = !memory_.empty();
      const Eigen::VectorXd dir = quasi_newton ? memory_.direction(g) : Eigen::VectorXd(-g);
      const double slope = g.dot(dir);
      if (quasi_newton && !(slope < 0.0)) {
        memory_.clear();
        continue;
      }
      // Largest step so far with sufficient decrease; accepted if the curvature
      // condition never holds within the search budget.
      std::optional<State> best;
      LossTerms best_terms;
      double best_t = 0.0;
      double lo = 0.0, hi = std::numeric_limits<double>::infinity();
      double t = quasi_newton ? 1.0 : gradient_step_;
      for (int k = 0; k < kMaxLineSearch; ++k) {
        State candidate = advance(current, t * dir);
        const LossTerms next = value(candidate);
        if (!(std::isfinite(next.total) && next.total <= terms.total + kArmijo * t * slope)) {
          hi = t;
        } else {
          const bool curvature = gradient(candidate).dot(dir) >= kWolfe * slope;
          best = std::move(candidate);
          best_terms = next;
          best_t = t;
          if (curvature) break;
          lo = t;
        }
        t = std::isinf(hi) ? 2.0 * t : 0.5 * (lo + hi);
      }
      if (best) {
        current = std::move(*best);
        terms = best_terms;
        taken = best_t;
        last_step_ = best_t * dir;
        last_gradient_ = g;
        if (!quasi_newton) gradient_step_ = 2.0 * best_t;
        return true;
      }
      if (!quasi_newton) return false;
      memory_.clear();
    }
  }

 private:
  Lbfgs memory_;
  double gradient_step_;
  Eigen::VectorXd last_step_;
  Eigen::VectorXd last_gradient_;
};

UnconstrainedFrameTransforms fit_frame(const Mesh& mesh, const AnchorSet& anchors,
                                       const FrameObservation& frame, const FitConfig& config,
                                       int frame_index, LossTrace& trace) {
  const FrameObjective objective(mesh, anchors, frame, config, frame_index);
  const std::string what = "stage 1, frame " + std::to_string(frame_index);
  std::vector<RigidTransform> current(anchors.size(), RigidTransform::identity());
  LossTerms terms = objective.value(current);
  trace.push_back({1, frame_index, 0, terms, 0.0});
  if (!std::isfinite(terms.total)) throw FitDivergedError(what + ": non-finite loss", 0);

  BlockDescent block(config.step_size);
  for (int it = 1; it <= config.stage1_iterations && terms.total > 0.0; ++it) {
    const double previous = terms.total;
    double taken = 0.0;
    const bool moved = block.step(
        current, terms, taken, it, what, [&](const auto& t) { return objective.value(t); },
        [&](const auto& t) { return objective.gradient(t); },
        [&](const auto& t, const Eigen::VectorXd& d) { return retract(t, scaled(d, 0, d.size(), 1.0)); });
    if (!moved) break;
    trace.push_back({1, frame_index, it, terms, taken});
    if (converged(previous, terms.total, config.convergence_tol)) break;
  }
  return {frame.time_index, current};
}

}  // namespace

void FitConfig::validate() const {
  if (stage1_iterations < 0 || stage2_iterations < 0)
    throw ConfigError("iteration counts must be non-negative");
  if (!(step_size > 0.0)) throw ConfigError("step_size must be positive");
  if (tau && !(*tau > 0.0)) throw ConfigError("tau must be positive");
  if (gamma && !(*gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (!(convergence_tol > 0.0)) throw ConfigError("convergence_tol must be positive");
  if (loss_weights.recon < 0.0 || loss_weights.cycle < 0.0 || loss_weights.anchors < 0.0)
    throw ConfigError("loss weights must be non-negative");
  if (loss_weights.recon + loss_weights.cycle + loss_weights.anchors == 0.0)
    throw ConfigError("loss weights are all zero");
  if (cycle_samples <= 0) throw ConfigError("cycle_samples must be positive");
}

std::vector<Vec3> cycle_samples(const FrameObservation& frame, int count, std::uint64_t seed) {
  const auto& pts = frame.target_points;
  if (pts.empty()) throw std::invalid_argument("cycle_samples: frame has no target points");
  if (static_cast<std::size_t>(count) >= pts.size()) return pts;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(pts.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  // Partial Fisher-Yates; std::sample's draw order is library specific.
  for (std::size_t i = 0; i < static_cast<std::size_t>(count); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(pts[idx[static_cast<std::size_t>(i)]]);
  return out;
}

std::string format_trace(const LossTrace& trace) {
  std::ostringstream os;
  os.precision(10);
  os << "stage\tframe\titeration\trecon\tcycle\tanchors\ttotal\tstep\n";
  for (const TraceRow& r : trace)
    os << r.stage << '\t' << r.frame << '\t' << r.iteration << '\t' << r.terms.recon << '\t'
       << r.terms.cycle << '\t' << r.terms.anchors << '\t' << r.terms.total << '\t' << r.step
       << '\n';
  return os.str();
}

Stage1Result fit_stage1(const Mesh& template_mesh, const AnchorSet& anchors,
                        std::span<const FrameObservation> frames, const FitConfig& config) {
  config.validate();
  if (frames.empty()) throw std::invalid_argument("fit_stage1: no frames");
  template_mesh.validate();
  const AnchorSet fit_anchors = effective_anchors(anchors, config);

  const long n = static_cast<long>(frames.size());
  std::vector<UnconstrainedFrameTransforms> results(frames.size());
  std::vector<LossTrace> traces(frames.size());
  std::vector<std::exception_ptr> errors(frames.size());
#pragma omp parallel for schedule(dynamic)
  for (long f = 0; f < n; ++f) {
    try {
      results[f] = fit_frame(template_mesh, fit_anchors, frames[f], config, static_cast<int>(f),
                             traces[f]);
    } catch (...) {
      errors[f] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  Stage1Result out;
  out.frames = std::move(results);
  for (auto& t : traces) out.trace.insert(out.trace.end(), t.begin(), t.end());
  return out;
}

namespace {

// Joint objective over every frame's transforms and the link residuals.
class ChainAwareObjective {
 public:
  ChainAwareObjective(const KinematicChain& chain, const Mesh& mesh, const AnchorSet& anchors,
                      std::span<const FrameObservation> frames, const FitConfig& config,
                      double gamma)
      : chain_(chain), anchors_(anchors), config_(config), gamma_(gamma) {
    for (std::size_t f = 0; f < frames.size(); ++f)
      frame_objectives_.emplace_back(mesh, anchors, frames[f], config, static_cast<int>(f));
    frames_ = frames;
  }

  KinematicChain chain_for(const std::vector<double>& raw) const {
    if (!config_.optimize_residuals) return chain_;
    return apply_residuals(chain_, {raw, gamma_});
  }

  double anchor_term(const std::vector<std::vector<RigidTransform>>& transforms,
                     const std::vector<double>& raw) const {
    const KinematicChain chain = chain_for(raw);
    const auto associations = build_associations(chain, anchors_);
    double total = 0.0;
    for (std::size_t f = 0; f < frames_.size(); ++f)
      total += chain_aware_anchor_loss(chain, associations, anchors_, transforms[f],
                                       frames_[f].root_pose);
    return total;
  }

  LossTerms value(const std::vector<std::vector<RigidTransform>>& transforms,
                  const std::vector<double>& raw) const {
    LossTerms terms;
    std::vector<LossTerms> per_frame(frames_.size());
    const long n = static_cast<long>(frames_.size());
#pragma omp parallel for schedule(static)
    for (long f = 0; f < n; ++f) per_frame[f] = frame_objectives_[f].value(transforms[f]);
    for (const auto& t : per_frame) {
      terms.recon += t.recon;
      terms.cycle += t.cycle;
    }
    if (config_.loss_weights.anchors > 0.0) terms.anchors = anchor_term(transforms, raw);
    terms.total = config_.loss_weights.recon * terms.recon +
                  config_.loss_weights.cycle * terms.cycle +
                  config_.loss_weights.anchors * terms.anchors;
    return terms;
  }

  // Per-frame tangent gradients, concatenated.
  Eigen::VectorXd transform_gradient(const std::vector<std::vector<RigidTransform>>& transforms,
                                     const std::vector<double>& raw) const {
    const Eigen::Index block = static_cast<Eigen::Index>(6 * anchors_.size());
    const Eigen::Index frames = static_cast<Eigen::Index>(frames_.size());
    Eigen::VectorXd g = Eigen::VectorXd::Zero(block * frames);
    const KinematicChain chain = chain_for(raw);
    const auto associations = build_associations(chain, anchors_);
    const double wa = config_.loss_weights.anchors;
    for (Eigen::Index f = 0; f < frames; ++f) {
      Eigen::VectorXd gf = frame_objectives_[f].gradient(transforms[f]);
      if (wa > 0.0)
        gf += wa * chain_aware_anchor_gradient(chain, associations, anchors_, transforms[f],
                                               frames_[f].root_pose)
                       .gradient;
      g.segment(f * block, block) = gf;
    }
    return g;
  }

  // Associations follow the residual-updated chain (alpha is a distance from
  // the parent joint, so freezing them would break the canonical fixed
  // point). Central differences on the cheap anchor term.
  Eigen::VectorXd residual_gradient(const std::vector<std::vector<RigidTransform>>& transforms,
                                    const std::vector<double>& raw) const {
    constexpr double h = 1e-6;
    Eigen::VectorXd g(static_cast<Eigen::Index>(raw.size()));
    std::vector<double> r = raw;
    for (std::size_t l = 0; l < r.size(); ++l) {
      const double saved = r[l];
      r[l] = saved + h;
      const double plus = anchor_term(transforms, r);
      r[l] = saved - h;
      const double minus = anchor_term(transforms, r);
      r[l] = saved;
      g[static_cast<Eigen::Index>(l)] = config_.loss_weights.anchors * (plus - minus) / (2.0 * h);
    }
    return g;
  }

 private:
  const KinematicChain& chain_;
  const AnchorSet& anchors_;
  const FitConfig& config_;
  double gamma_;
  std::vector<FrameObjective> frame_objectives_;
  std::span<const FrameObservation> frames_;
};

}  // namespace

Stage2Result fit_stage2(const KinematicChain& chain, const Mesh& template_mesh,
                        const AnchorSet& anchors, std::span<const UnconstrainedFrameTransforms> stage1,
                        std::span<const FrameObservation> frames, const FitConfig& config) {
  config.validate();
  if (frames.empty()) throw std::invalid_argument("fit_stage2: no frames");
  if (stage1.size() != frames.size())
    throw std::invalid_argument("fit_stage2: expected one stage-1 result per frame");
  const AnchorSet fit_anchors = effective_anchors(anchors, config);
  for (const auto& s : stage1)
    if (s.per_anchor.size() != fit_anchors.size())
      throw std::invalid_argument("fit_stage2: stage-1 transforms do not match the anchor count");

  const double gamma = config.gamma.value_or(0.1 * chain.min_link_length());
  if (config.optimize_residuals && !(gamma < chain.min_link_length()))
    throw ConfigError("fit_stage2: gamma must be smaller than the minimum link length");

  const ChainAwareObjective objective(chain, template_mesh, fit_anchors, frames, config, gamma);
  std::vector<std::vector<RigidTransform>> current;
  for (const auto& s : stage1) current.push_back(s.per_anchor);
  std::vector<double> raw(config.optimize_residuals ? chain.link_count() : 0, 0.0);

  Stage2Result out{chain, {std::vector<double>(chain.link_count(), 0.0), gamma}, {}, {}, {}};
  LossTerms terms = objective.value(current, raw);
  out.trace.push_back({2, -1, 0, terms, 0.0});
  if (!std::isfinite(terms.total)) throw FitDivergedError("stage 2: non-finite loss", 0);

  // Transforms and residuals take separate steps: the Chamfer subgradient
  // noise in the transform block would otherwise swamp the residual
  // curvature estimate.
  using Transforms = std::vector<std::vector<RigidTransform>>;
  const Eigen::Index block = static_cast<Eigen::Index>(6 * fit_anchors.size());
  const bool fit_residuals = config.optimize_residuals && config.loss_weights.anchors > 0.0;
  BlockDescent transform_block(config.step_size);
  BlockDescent residual_block(config.step_size);
  for (int it = 1; it <= config.stage2_iterations && terms.total > 0.0; ++it) {
    const double previous = terms.total;
    double taken = 0.0, taken_residual = 0.0;
    const bool moved = transform_block.step(
        current, terms, taken, it, "stage 2",
        [&](const Transforms& t) { return objective.value(t, raw); },
        [&](const Transforms& t) { return objective.transform_gradient(t, raw); },
        [&](const Transforms& t, const Eigen::VectorXd& d) {
          Transforms next(t.size());
          for (std::size_t f = 0; f < t.size(); ++f)
            next[f] = retract(t[f], scaled(d, static_cast<Eigen::Index>(f) * block, block, 1.0));
          return next;
        });
    const bool moved_residual =
        fit_residuals &&
        residual_block.step(
            raw, terms, taken_residual, it, "stage 2",
            [&](const std::vector<double>& r) { return objective.value(current, r); },
            [&](const std::vector<double>& r) { return objective.residual_gradient(current, r); },
            [&](const std::vector<double>& r, const Eigen::VectorXd& d) {
              std::vector<double> next = r;
              for (std::size_t l = 0; l < next.size(); ++l) next[l] += d[static_cast<Eigen::Index>(l)];
              return next;
            });
    if (!moved && !moved_residual) break;
    out.trace.push_back({2, -1, it, terms, taken});
    if (converged(previous, terms.total, config.convergence_tol)) break;
  }

  if (config.optimize_residuals) {
    out.residuals.raw = raw;
    out.chain = apply_residuals(chain, out.residuals);
  }
  out.associations = build_associations(out.chain, fit_anchors);
  for (std::size_t f = 0; f < frames.size(); ++f)
    out.frames.push_back({stage1[f].time_index, current[f]});
  return out;
}

}  // namespace kinchain
