#pragma once

#include <nlohmann/json.hpp>

#include "bellqft/fock.hpp"

namespace bellqft {

/// Layout (schema "bellqft.fock_vector/1"):
///
///   { "schema": ..., "grid": {"length": L, "n_sites": N}, "n_max": n,
///     "sectors": { "0": [[re, im]], "1": [[re, im], ...], ... } }
///
/// Each sector array is the row-major flattening of the N^n tensor block.
nlohmann::json to_json(const FockVector& psi);
FockVector fock_vector_from_json(const nlohmann::json& j);

/// Same layout with plain numbers per tuple (schema "bellqft.density_grid/1").
nlohmann::json to_json(const SectorField& field);

}  // namespace bellqft
