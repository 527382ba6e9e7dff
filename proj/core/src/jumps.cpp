#include "bellqft/jumps.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "bellqft/error.hpp"

namespace bellqft {

const char* to_string(JumpKind kind) {
  switch (kind) {
    case JumpKind::Creation:
      return "creation";
    case JumpKind::Annihilation:
      return "annihilation";
    case JumpKind::Hop:
      return "hop";
  }
  return "unknown";
}

TransitionKernel::TransitionKernel(const ModelSpec& spec, const AtomTable& atoms)
    : atoms_(&atoms), hbar_(spec.hbar) {
  if (!(spec.space() == atoms.space())) throw ValidationError("atom table does not match the model");
  const auto& grid = spec.grid;
  const std::vector<double> phi = spec.form_factor_values();
  const double source_scale = spec.coupling * std::sqrt(grid.spacing());
  const double hop = spec.hopping();
  const int n_max = atoms.space().n_max();

  measure_.resize(atoms.size());
  interaction_.resize(atoms.size());
  hops_.resize(atoms.size());

  std::vector<int> sites;
  for (std::size_t id = 0; id < atoms.size(); ++id) {
    const Atom& atom = atoms[id];
    measure_[id] = atom.multiplicity * atoms.space().weight(atom.sector);

    if (spec.coupling != 0.0) {
      if (atom.sector < n_max) {
        for (int k = 0; k < grid.n_sites(); ++k) {
          const double f = phi[static_cast<std::size_t>(k)];
          if (f == 0.0) continue;
          sites = atom.sites;
          sites.push_back(k);
          interaction_[id].push_back({atoms.id_of_sites(sites), JumpKind::Creation, k, -1,
                                      source_scale * f * std::sqrt(atom.occupation(k) + 1.0)});
        }
      }
      for (std::size_t i = 0; i < atom.sites.size(); ++i) {
        const int k = atom.sites[i];
        if (i > 0 && atom.sites[i - 1] == k) continue;
        const double f = phi[static_cast<std::size_t>(k)];
        if (f == 0.0) continue;
        sites = atom.sites;
        sites.erase(sites.begin() + static_cast<long>(i));
        interaction_[id].push_back({atoms.id_of_sites(sites), JumpKind::Annihilation, k, -1,
                                    source_scale * f * std::sqrt(static_cast<double>(atom.occupation(k)))});
      }
    }

    for (std::size_t i = 0; i < atom.sites.size(); ++i) {
      const int k = atom.sites[i];
      if (i > 0 && atom.sites[i - 1] == k) continue;
      const int n_k = atom.occupation(k);
      for (int step : {+1, -1}) {
        const int to = grid.wrap(k + step);
        sites = atom.sites;
        sites[i] = to;
        const int target = atoms.id_of_sites(sites);
        const double element = -hop * std::sqrt(static_cast<double>(n_k)) * std::sqrt(atom.occupation(to) + 1.0);
        auto existing = std::find_if(hops_[id].begin(), hops_[id].end(),
                                     [target](const Link& l) { return l.target == target; });
        if (existing != hops_[id].end()) {
          existing->element += element;
        } else {
          hops_[id].push_back({target, JumpKind::Hop, to, k, element});
        }
      }
    }
  }
}

const TransitionKernel::Link* TransitionKernel::find_link(int source, int target) const {
  for (const auto* links : {&interaction_links(source), &hop_links(source)}) {
    for (const auto& l : *links) {
      if (l.target == target) return &l;
    }
  }
  return nullptr;
}

double TransitionKernel::kernel(const Link& link, int source) const {
  return link.element / std::sqrt(measure(link.target) * measure(source));
}

namespace {

void append_rates(const FockVector& psi, const TransitionKernel& kernel, int source, cplx psi_source,
                  const std::vector<TransitionKernel::Link>& links, RateKernelRow& row) {
  const auto& atoms = kernel.atoms();
  const double inv_density = 1.0 / std::norm(psi_source);
  for (const auto& link : links) {
    const cplx psi_target = psi.at(atoms[static_cast<std::size_t>(link.target)]);
    const double flux = std::imag(std::conj(psi_target) * kernel.kernel(link, source) * psi_source);
    const double rate = (2.0 / kernel.hbar()) * std::max(flux, 0.0) * inv_density * kernel.measure(link.target);
    if (rate > 0.0) {
      row.destinations.push_back({link.target, link.kind, link.site, link.from_site, rate});
      row.total_rate += rate;
    }
  }
}

}  // namespace

void fill_rates(const FockVector& psi, std::span<const double> floors, const TransitionKernel& kernel,
                int source_atom, bool include_hops, RateKernelRow& row) {
  const auto& atoms = kernel.atoms();
  const Atom& atom = atoms[static_cast<std::size_t>(source_atom)];
  row.source_atom = source_atom;
  row.destinations.clear();
  row.total_rate = 0.0;

  const cplx psi_source = psi.at(atom);
  const double tuple_prob = psi.space().weight(atom.sector) * std::norm(psi_source);
  if (!(tuple_prob > floors[static_cast<std::size_t>(atom.sector)])) {
    throw NodeError("jump source is at a node");
  }
  append_rates(psi, kernel, source_atom, psi_source, kernel.interaction_links(source_atom), row);
  if (include_hops) append_rates(psi, kernel, source_atom, psi_source, kernel.hop_links(source_atom), row);
}

RateKernelRow jump_rates(const FockVector& psi, const TransitionKernel& kernel, int source_atom) {
  RateKernelRow row;
  fill_rates(psi, node_floors(psi), kernel, source_atom, false, row);
  row.source = kernel.atoms().configuration(static_cast<std::size_t>(source_atom));
  return row;
}

RateKernelRow jump_rates(const FockVector& psi, const TransitionKernel& kernel, const Configuration& q) {
  const int id = kernel.atoms().id_of(q);
  if (id < 0) throw ValidationError("configuration exceeds the truncation n_max");
  return jump_rates(psi, kernel, id);
}

RateKernelRow lattice_rates(const FockVector& psi, const TransitionKernel& kernel, int source_atom) {
  RateKernelRow row;
  fill_rates(psi, node_floors(psi), kernel, source_atom, true, row);
  row.source = kernel.atoms().configuration(static_cast<std::size_t>(source_atom));
  return row;
}

namespace {

/// Classify the jump between two atoms from their site multisets.
Destination classify(const AtomTable& atoms, int source, int target) {
  const auto& from = atoms[static_cast<std::size_t>(source)].sites;
  const auto& to = atoms[static_cast<std::size_t>(target)].sites;
  std::vector<int> gained;
  std::vector<int> lost;
  std::set_difference(to.begin(), to.end(), from.begin(), from.end(), std::back_inserter(gained));
  std::set_difference(from.begin(), from.end(), to.begin(), to.end(), std::back_inserter(lost));
  Destination d;
  d.atom = target;
  if (to.size() > from.size()) {
    d.kind = JumpKind::Creation;
    d.site = gained.empty() ? -1 : gained.front();
  } else if (to.size() < from.size()) {
    d.kind = JumpKind::Annihilation;
    d.site = lost.empty() ? -1 : lost.front();
  } else {
    d.kind = JumpKind::Hop;
    d.site = gained.empty() ? -1 : gained.front();
    d.from_site = lost.empty() ? -1 : lost.front();
  }
  return d;
}

}  // namespace

RateKernelRow pv_rates(const FockVector& psi, const OperatorBlocks& ops, const AtomTable& atoms, int source_atom,
                       bool include_free) {
  const auto& space = psi.space();
  const Eigen::VectorXcd u = psi.to_orthonormal();
  const Eigen::VectorXcd pu = pv_project(u, ConfigRegion::of_atom(atoms, static_cast<std::size_t>(source_atom)));
  const double source_mass = pu.squaredNorm();
  const int n = atoms[static_cast<std::size_t>(source_atom)].sector;
  if (!(source_mass / atoms[static_cast<std::size_t>(source_atom)].multiplicity > node_floor(psi, n))) {
    throw NodeError("jump source is at a node");
  }
  const SparseOperator& h = include_free ? ops.total : ops.h_interaction;
  const Eigen::VectorXcd hpu = h * pu;

  // <Psi| P(q) H P(q') |Psi> accumulated per destination atom.
  std::map<int, cplx> overlaps;
  for (int m = 0; m <= space.n_max(); ++m) {
    for (std::size_t idx = 0; idx < space.block_size(m); ++idx) {
      const auto flat = static_cast<Eigen::Index>(space.offset(m) + idx);
      if (hpu[flat] == cplx(0.0)) continue;
      const int target = atoms.id_of_tuple(m, idx);
      if (target == source_atom) continue;
      overlaps[target] += std::conj(u[flat]) * hpu[flat];
    }
  }

  RateKernelRow row;
  row.source_atom = source_atom;
  row.source = atoms.configuration(static_cast<std::size_t>(source_atom));
  for (const auto& [target, overlap] : overlaps) {
    const double rate = (2.0 / ops.hbar) * std::max(std::imag(overlap), 0.0) / source_mass;
    if (rate > 0.0) {
      Destination d = classify(atoms, source_atom, target);
      d.rate = rate;
      row.destinations.push_back(d);
      row.total_rate += rate;
    }
  }
  return row;
}

double flux_element(const FockVector& psi, const TransitionKernel& kernel, int q, int q_prime) {
  const auto* link = kernel.find_link(q_prime, q);
  if (link == nullptr) throw ValidationError("configurations are not connected by a single H element");
  const auto& atoms = kernel.atoms();
  const cplx psi_q = psi.at(atoms[static_cast<std::size_t>(q)]);
  const cplx psi_qp = psi.at(atoms[static_cast<std::size_t>(q_prime)]);
  return (2.0 / kernel.hbar()) * std::imag(std::conj(psi_q) * kernel.kernel(*link, q_prime) * psi_qp) *
         kernel.measure(q) * kernel.measure(q_prime);
}

namespace {

/// sigma(to | from) * rho(from), going through the rate formula when `from` is
/// off a node.
double rate_times_density(const FockVector& psi, const TransitionKernel& kernel, int to, int from) {
  const auto* link = kernel.find_link(from, to);
  const auto& atoms = kernel.atoms();
  const Atom& source = atoms[static_cast<std::size_t>(from)];
  const cplx psi_from = psi.at(source);
  const double rho_from = kernel.measure(from) * std::norm(psi_from);
  if (rho_from > 0.0) {
    RateKernelRow row;
    append_rates(psi, kernel, from, psi_from, {*link}, row);
    return row.total_rate * rho_from;
  }
  return 0.0;
}

}  // namespace

double net_flux(const FockVector& psi, const TransitionKernel& kernel, int q, int q_prime) {
  if (kernel.find_link(q_prime, q) == nullptr) {
    throw ValidationError("configurations are not connected by a single H element");
  }
  return rate_times_density(psi, kernel, q, q_prime) - rate_times_density(psi, kernel, q_prime, q);
}

std::optional<Destination> sample_jump(const RateKernelRow& row, double dt, Rng& rng) {
  const double p = row.total_rate * dt;
  if (p > kJumpGuard) {
    throw StepSizeError("jump probability per step " + std::to_string(p) + " exceeds 0.1; reduce dt",
                        row.total_rate, dt);
  }
  const double u = rng.uniform();
  if (u >= p) return std::nullopt;
  // Conditional on a jump, u / dt is uniform on [0, total_rate).
  double target = u / dt;
  for (const auto& d : row.destinations) {
    if (target < d.rate) return d;
    target -= d.rate;
  }
  return row.destinations.back();
}

}  // namespace bellqft
