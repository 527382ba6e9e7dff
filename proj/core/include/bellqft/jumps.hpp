#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bellqft/fock.hpp"
#include "bellqft/model.hpp"
#include "bellqft/rng.hpp"

namespace bellqft {

enum class JumpKind { Creation, Annihilation, Hop };

const char* to_string(JumpKind kind);

struct Destination {
  int atom = -1;
  JumpKind kind = JumpKind::Creation;
  int site = -1;       // created / removed / arrival site
  int from_site = -1;  // departure site of a hop
  double rate = 0.0;   // 1/time
};

/// Jump kernel sigma(.|q') out of one grid configuration.
struct RateKernelRow {
  int source_atom = -1;
  Configuration source;
  std::vector<Destination> destinations;
  double total_rate = 0.0;
};

/// Matrix elements of H between atoms in the orthonormal occupation-number
/// basis, from the ladder algebra:
///   creation at k:      g sqrt(a) phi(k) sqrt(n_k + 1)
///   annihilation at k:  g sqrt(a) phi(k) sqrt(n_k)
///   hop k -> k +- 1:    -hbar^2/(2 m a^2) sqrt(n_k) sqrt(n_{k+-1} + 1)
/// Built once per model; shared read-only.
class TransitionKernel {
 public:
  struct Link {
    int target;
    JumpKind kind;
    int site;
    int from_site;
    double element;  // <target|H|source>
  };

  TransitionKernel(const ModelSpec& spec, const AtomTable& atoms);

  const AtomTable& atoms() const { return *atoms_; }
  const FockSpace& space() const { return atoms_->space(); }
  double hbar() const { return hbar_; }

  const std::vector<Link>& interaction_links(int source) const { return interaction_[static_cast<std::size_t>(source)]; }
  const std::vector<Link>& hop_links(int source) const { return hops_[static_cast<std::size_t>(source)]; }
  const Link* find_link(int source, int target) const;

  /// Configuration-space volume of an atom: (orderings) * a^n / n!.
  double measure(int atom) const { return measure_[static_cast<std::size_t>(atom)]; }

  /// Function-representation kernel <q|H|q'> = element / sqrt(measure(q) measure(q')).
  double kernel(const Link& link, int source) const;

 private:
  const AtomTable* atoms_;
  double hbar_;
  std::vector<double> measure_;
  std::vector<std::vector<Link>> interaction_;
  std::vector<std::vector<Link>> hops_;
};

/// sigma(q|q') = (2/hbar) [Im conj(Psi(q)) <q|H_I|q'> Psi(q')]^+ / |Psi(q')|^2 * dq
/// over every q reachable by one H_I element. Throws NodeError at a node.
RateKernelRow jump_rates(const FockVector& psi, const TransitionKernel& kernel, int source_atom);
/// Continuum configuration: snapped to its nearest grid configuration first.
RateKernelRow jump_rates(const FockVector& psi, const TransitionKernel& kernel, const Configuration& q);

/// Lattice process: the same formula with the full H, so free motion
/// appears as nearest-neighbour hops.
RateKernelRow lattice_rates(const FockVector& psi, const TransitionKernel& kernel, int source_atom);

/// Reusable-buffer form used by the trajectory loop.
void fill_rates(const FockVector& psi, std::span<const double> floors, const TransitionKernel& kernel,
                int source_atom, bool include_hops, RateKernelRow& row);

/// Rates through the PV measure:
/// sigma(q|q') = (2/hbar) [Im <Psi|P(q) H P(q')|Psi>]^+ / <Psi|P(q')|Psi>,
/// using orbit projections and the sparse tensor-space operator.
RateKernelRow pv_rates(const FockVector& psi, const OperatorBlocks& ops, const AtomTable& atoms, int source_atom,
                       bool include_free);

/// sigma(q|q') rho(q') - sigma(q'|q) rho(q) for a pair linked by H.
double net_flux(const FockVector& psi, const TransitionKernel& kernel, int q, int q_prime);

/// (2/hbar) Im[conj(Psi(q)) <q|H|q'> Psi(q')] dq dq', the matrix-element flux.
double flux_element(const FockVector& psi, const TransitionKernel& kernel, int q, int q_prime);

/// Bernoulli thinning: with probability total_rate * dt pick a destination
/// proportional to rate. Throws StepSizeError if total_rate * dt > 0.1.
std::optional<Destination> sample_jump(const RateKernelRow& row, double dt, Rng& rng);

inline constexpr double kJumpGuard = 0.1;

}  // namespace bellqft
