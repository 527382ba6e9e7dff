#include "bellqft/fock_json.hpp"

#include <string>

#include "bellqft/error.hpp"

namespace bellqft {

using nlohmann::json;

namespace {

json grid_json(const FockSpace& space) {
  return json{{"length", space.grid().length()}, {"n_sites", space.grid().n_sites()}};
}

}  // namespace

json to_json(const FockVector& psi) {
  json sectors = json::object();
  for (int n = 0; n <= psi.space().n_max(); ++n) {
    json data = json::array();
    const auto& b = psi.block(n);
    for (Eigen::Index i = 0; i < b.size(); ++i) data.push_back({b[i].real(), b[i].imag()});
    sectors[std::to_string(n)] = std::move(data);
  }
  return json{{"schema", "bellqft.fock_vector/1"},
              {"grid", grid_json(psi.space())},
              {"n_max", psi.space().n_max()},
              {"sectors", std::move(sectors)}};
}

FockVector fock_vector_from_json(const json& j) {
  try {
    if (j.at("schema").get<std::string>() != "bellqft.fock_vector/1") {
      throw ValidationError("unsupported fock vector schema");
    }
    const GridSpec grid(j.at("grid").at("length").get<double>(), j.at("grid").at("n_sites").get<int>());
    const FockSpace space(grid, j.at("n_max").get<int>());
    FockVector psi(space);
    for (int n = 0; n <= space.n_max(); ++n) {
      const auto& data = j.at("sectors").at(std::to_string(n));
      if (data.size() != space.block_size(n)) {
        throw ValidationError("sector " + std::to_string(n) + " has the wrong number of entries");
      }
      for (std::size_t i = 0; i < data.size(); ++i) {
        psi.block(n)[static_cast<Eigen::Index>(i)] = cplx(data[i].at(0).get<double>(), data[i].at(1).get<double>());
      }
    }
    return psi;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed fock vector JSON: ") + e.what());
  }
}

json to_json(const SectorField& field) {
  json sectors = json::object();
  for (int n = 0; n <= field.space.n_max(); ++n) {
    const auto& b = field.blocks[static_cast<std::size_t>(n)];
    sectors[std::to_string(n)] = std::vector<double>(b.data(), b.data() + b.size());
  }
  return json{{"schema", "bellqft.density_grid/1"},
              {"grid", grid_json(field.space)},
              {"n_max", field.space.n_max()},
              {"sectors", std::move(sectors)}};
}

}  // namespace bellqft
