#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace qpsim {

/// Thrown by the target-hop-fidelity solvers when no physical hop fidelity
/// (<= 1) can meet the requested end-to-end threshold. Deliberately a distinct
/// type so schedulers can fall back explicitly instead of clamping.
class InfeasibleTargetError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Werner-state fidelity, a dimensionless value in [0, 1]. Values within
/// 1e-12 of the boundary are snapped onto it; anything further out is a
/// domain error rather than a silent clamp.
class Fidelity {
 public:
  Fidelity() = default;

  explicit Fidelity(double value) : value_(value) {
    constexpr double slack = 1e-12;
    if (value_ < 0.0) {
      if (value_ < -slack) {
        throw std::domain_error("fidelity out of range: " + std::to_string(value_));
      }
      value_ = 0.0;
    } else if (value_ > 1.0) {
      if (value_ > 1.0 + slack) {
        throw std::domain_error("fidelity out of range: " + std::to_string(value_));
      }
      value_ = 1.0;
    }
  }

  double value() const { return value_; }

  friend auto operator<=>(const Fidelity&, const Fidelity&) = default;

 private:
  double value_ = 0.0;
};

/// Two-qubit gate and measurement fidelities entering the swap chain.
struct GateParameters {
  double two_qubit_gate_fidelity = 0.98;
  double measurement_fidelity = 0.99;

  /// Per-swap attenuation factor p2*(4*eta^2 - 1)/3; in (0, 1] for valid
  /// parameters.
  double chain_attenuation() const {
    const double eta = measurement_fidelity;
    return two_qubit_gate_fidelity * (4.0 * eta * eta - 1.0) / 3.0;
  }

  void validate() const {
    if (!(two_qubit_gate_fidelity > 0.0 && two_qubit_gate_fidelity <= 1.0)) {
      throw std::domain_error("two-qubit gate fidelity must be in (0, 1]");
    }
    if (!(measurement_fidelity > 0.0 && measurement_fidelity <= 1.0)) {
      throw std::domain_error("measurement fidelity must be in (0, 1]");
    }
    const double k = chain_attenuation();
    if (!(k > 0.0 && k <= 1.0)) {
      throw std::domain_error("chain attenuation factor must be in (0, 1]");
    }
  }
};

/// A chain of purified hops to be joined by entanglement swapping.
struct ChainSpec {
  std::vector<Fidelity> hop_fidelities;
  GateParameters gate_params;
};

/// Standard Werner correspondence between the mixing parameter p and the
/// fidelity of the state: f = p + (1 - p)/4.
inline Fidelity fidelity_from_werner_mixing(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::domain_error("Werner mixing parameter must be in [0, 1]");
  }
  return Fidelity(p + (1.0 - p) / 4.0);
}

/// One round of pairwise purification. Fixed points at 0.5 and 1.0; improves
/// any fidelity strictly between them.
inline Fidelity purify_once(Fidelity f) {
  const double x = f.value();
  const double r = 1.0 - x;
  const double num = x * x + r * r / 9.0;
  const double den = x * x + 2.0 / 3.0 * x * r + 5.0 / 9.0 * r * r;
  return Fidelity(num / den);
}

/// Probability that one purification attempt succeeds. Lies in [0.5, 1] and
/// is monotonically increasing above fidelity 0.25.
inline double purify_success_probability(Fidelity f) {
  const double x = f.value();
  const double r = 1.0 - x;
  return x * x + 2.0 / 3.0 * x * r + 5.0 / 9.0 * r * r;
}

/// Iterated purification; rounds = 0 is the identity.
inline Fidelity purify_rounds(Fidelity f0, int rounds) {
  if (rounds < 0) {
    throw std::invalid_argument("purification rounds must be non-negative");
  }
  Fidelity f = f0;
  for (int i = 0; i < rounds; ++i) {
    f = purify_once(f);
  }
  return f;
}

/// End-to-end fidelity of a swapped chain of purified hops.
inline Fidelity chain_fidelity(const ChainSpec& spec) {
  if (spec.hop_fidelities.empty()) {
    throw std::domain_error("chain must contain at least one hop");
  }
  spec.gate_params.validate();
  const std::size_t n = spec.hop_fidelities.size();
  if (n == 1) {
    // 1/4 + 3/4 * (4f-1)/3 collapses to f; return it exactly.
    return spec.hop_fidelities.front();
  }
  double product = 1.0;
  for (const Fidelity& f : spec.hop_fidelities) {
    product *= (4.0 * f.value() - 1.0) / 3.0;
  }
  const double k = spec.gate_params.chain_attenuation();
  const double value =
      0.25 + 0.75 * std::pow(k, static_cast<double>(n - 1)) * product;
  return Fidelity(value);
}

/// Upper bound on the chain fidelity: the weakest purified hop.
inline Fidelity min_hop_fidelity_bound(const ChainSpec& spec) {
  if (spec.hop_fidelities.empty()) {
    throw std::domain_error("chain must contain at least one hop");
  }
  Fidelity best = spec.hop_fidelities.front();
  for (const Fidelity& f : spec.hop_fidelities) {
    if (f < best) best = f;
  }
  return best;
}

namespace detail {
inline void check_solver_preconditions(Fidelity target, int hops,
                                       const GateParameters& gate) {
  if (hops < 1) {
    throw std::invalid_argument("hop count must be at least 1");
  }
  if (target.value() <= 0.25) {
    throw std::domain_error("target fidelity must exceed 0.25");
  }
  gate.validate();
}
}  // namespace detail

/// Minimum fidelity one hop must be purified to so that the chain meets
/// `target`, assuming the other hops - 1 all sit at `best_other_hops`.
/// Throws InfeasibleTargetError when even a perfect hop is not enough.
inline Fidelity solve_target_hop_fidelity_min(Fidelity target, int hops,
                                              Fidelity best_other_hops,
                                              const GateParameters& gate) {
  detail::check_solver_preconditions(target, hops, gate);
  if (best_other_hops.value() <= 0.25) {
    throw std::domain_error("surrounding hop fidelity must exceed 0.25");
  }
  const double k = gate.chain_attenuation();
  const double others = (4.0 * best_other_hops.value() - 1.0) / 3.0;
  const double denom = 0.75 * std::pow(k, hops - 1) * std::pow(others, hops - 1);
  const double x = (target.value() - 0.25) / denom;
  const double solved = (3.0 * x + 1.0) / 4.0;
  if (solved > 1.0 + 1e-12) {
    throw InfeasibleTargetError("no single-hop fidelity reaches the target");
  }
  return Fidelity(solved);
}

/// Conservative variant: the common fidelity all hops must be purified to so
/// that the chain meets `target`.
inline Fidelity solve_target_hop_fidelity_uniform(Fidelity target, int hops,
                                                  const GateParameters& gate) {
  detail::check_solver_preconditions(target, hops, gate);
  const double k = gate.chain_attenuation();
  const double y = (target.value() - 0.25) / (0.75 * std::pow(k, hops - 1));
  const double solved =
      (3.0 * std::pow(y, 1.0 / static_cast<double>(hops)) + 1.0) / 4.0;
  if (solved > 1.0 + 1e-12) {
    throw InfeasibleTargetError("no uniform hop fidelity reaches the target");
  }
  return Fidelity(solved);
}

}  // namespace qpsim
