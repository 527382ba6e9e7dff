#include "config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "bellqft/error.hpp"

namespace bellqft::cli {

namespace {

using nlohmann::json;

/// Reads one JSON object, remembering which keys were used so that leftovers
/// can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(name() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& get(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = get(key);
    if (!v.is_number()) throw ValidationError(qualified(key) + " must be a number");
    return v.get<double>();
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = get(key);
    if (!v.is_number_integer()) throw ValidationError(qualified(key) + " must be an integer");
    return v.get<std::int64_t>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = get(key);
    if (!v.is_number_unsigned()) throw ValidationError(qualified(key) + " must be a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = get(key);
    if (!v.is_boolean()) throw ValidationError(qualified(key) + " must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = get(key);
    if (!v.is_string()) throw ValidationError(qualified(key) + " must be a string");
    return v.get<std::string>();
  }

  cplx complex(const std::string& key, cplx fallback) {
    if (!has(key)) return fallback;
    const json& v = get(key);
    if (v.is_number()) return {v.get<double>(), 0.0};
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
      return {v[0].get<double>(), v[1].get<double>()};
    }
    throw ValidationError(qualified(key) + " must be a number or [re, im]");
  }

  std::vector<double> numbers(const std::string& key) {
    if (!has(key)) return {};
    const json& v = get(key);
    if (!v.is_array()) throw ValidationError(qualified(key) + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw ValidationError(qualified(key) + " must be an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  Section sub(const std::string& key) { return Section(get(key), qualified(key)); }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string name() const { return path_.empty() ? "config" : path_; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ValidationError("unknown key '" + qualified(it.key()) + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

ModelSpec parse_model(Section s) {
  Section grid = s.sub("grid");
  const double length = grid.number("length", std::numeric_limits<double>::quiet_NaN());
  const auto n_sites = grid.integer("n_sites", 0);
  grid.finish();
  if (!(length > 0.0) || !std::isfinite(length)) throw ValidationError("model.grid.length must be positive");
  if (n_sites < 3 || n_sites > 64) throw ValidationError("model.grid.n_sites must lie in [3, 64]");

  ModelSpec m(GridSpec(length, static_cast<int>(n_sites)));
  m.n_max = static_cast<int>(s.integer("n_max", m.n_max));
  m.mass = s.number("mass", m.mass);
  m.hbar = s.number("hbar", m.hbar);
  m.coupling = s.number("coupling", m.coupling);

  if (s.has("form_factor")) {
    Section ff = s.sub("form_factor");
    const std::string type = ff.string("type", "gaussian");
    if (type == "gaussian") {
      m.form_factor.shape = FormFactorSpec::Shape::Gaussian;
    } else if (type == "point") {
      m.form_factor.shape = FormFactorSpec::Shape::Point;
    } else {
      throw ValidationError("model.form_factor.type must be \"gaussian\" or \"point\"");
    }
    if (ff.has("width")) m.form_factor.width = ff.number("width", 0.0);
    if (ff.has("center")) m.form_factor.center = ff.number("center", 0.0);
    ff.finish();
  }

  const std::string mode = s.string("mode", "schrodinger_fock");
  if (mode == "schrodinger_fock") {
    m.mode = ModelMode::SchrodingerFock;
  } else if (mode == "dirac_1p") {
    m.mode = ModelMode::Dirac1p;
  } else if (mode == "klein_gordon") {
    throw ValidationError("model.mode \"klein_gordon\" is not supported; use \"schrodinger_fock\" or \"dirac_1p\"");
  } else {
    throw ValidationError("model.mode must be \"schrodinger_fock\" or \"dirac_1p\"");
  }

  if (s.has("dirac")) {
    Section d = s.sub("dirac");
    m.dirac.mass = d.number("mass", m.dirac.mass);
    m.dirac.c = d.number("c", m.dirac.c);
    d.finish();
  }
  s.finish();
  m.validate();
  return m;
}

void parse_initial(Section s, RunConfig& cfg) {
  cfg.initial.vacuum_amplitude = s.complex("vacuum_amplitude", cfg.initial.vacuum_amplitude);
  if (s.has("packets")) {
    const json& list = s.get("packets");
    if (!list.is_array()) throw ValidationError("initial_state.packets must be an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      Section p(list[i], "initial_state.packets[" + std::to_string(i) + "]");
      PacketSpec packet;
      packet.sector = static_cast<int>(p.integer("sector", packet.sector));
      packet.center = p.number("center", packet.center);
      packet.width = p.number("width", packet.width);
      packet.momentum = p.number("momentum", packet.momentum);
      packet.amplitude = p.complex("amplitude", packet.amplitude);
      p.finish();
      cfg.initial.packets.push_back(packet);
    }
  }
  if (s.has("dirac")) {
    Section d = s.sub("dirac");
    DiracInitial di;
    di.spinor.upper = d.complex("upper", di.spinor.upper);
    di.spinor.lower = d.complex("lower", di.spinor.lower);
    di.spinor.uniform = d.boolean("uniform", di.spinor.uniform);
    di.spinor.center = d.number("center", cfg.model.grid.length() / 2.0);
    di.spinor.width = d.number("width", di.spinor.width);
    di.spinor.momentum = d.number("momentum", di.spinor.momentum);
    di.x0 = d.number("x0", di.spinor.center);
    d.finish();
    cfg.dirac_initial = di;
  }
  s.finish();
}

PropagatorPlan parse_propagator(Section s) {
  PropagatorPlan plan;
  const std::string method = s.string("method", "eigendecomposition");
  if (method == "eigendecomposition") {
    plan.method = PropagationMethod::Eigendecomposition;
  } else if (method == "crank_nicolson") {
    plan.method = PropagationMethod::CrankNicolson;
  } else {
    throw ValidationError("propagator.method must be \"eigendecomposition\" or \"crank_nicolson\"");
  }
  plan.dt_psi = s.number("dt_psi", plan.dt_psi);
  plan.t_final = s.number("t_final", plan.t_final);
  plan.sample_times = s.numbers("sample_times");
  if (plan.sample_times.empty()) plan.sample_times = {plan.t_final};
  s.finish();
  plan.validate();
  return plan;
}

ProcessSection parse_process(Section s) {
  ProcessSection p;
  const std::string mode = s.string("mode", "lattice");
  if (mode == "lattice") {
    p.mode = ProcessMode::Lattice;
  } else if (mode == "continuum") {
    p.mode = ProcessMode::Continuum;
  } else {
    throw ValidationError("process.mode must be \"lattice\" or \"continuum\"");
  }
  p.dt = s.number("dt", p.dt);
  const auto m = s.integer("trajectories", static_cast<std::int64_t>(p.trajectories));
  if (m < 1) throw ValidationError("process.trajectories must be at least 1");
  p.trajectories = static_cast<std::size_t>(m);
  p.root_seed = s.unsigned_integer("root_seed", p.root_seed);
  p.jitter = s.boolean("jitter", p.jitter);
  s.finish();
  if (!(p.dt > 0.0) || !std::isfinite(p.dt)) throw ValidationError("process.dt must be positive");
  return p;
}

AnalysisSection parse_analysis(Section s) {
  AnalysisSection a;
  a.thresholds.tv_max = s.number("tv_max", a.thresholds.tv_max);
  a.thresholds.p_min = s.number("p_min", a.thresholds.p_min);
  a.negative_control = s.boolean("negative_control", a.negative_control);
  a.identity_states = static_cast<int>(s.integer("identity_states", a.identity_states));
  s.finish();
  if (!(a.thresholds.tv_max > 0.0 && a.thresholds.tv_max <= 1.0)) {
    throw ValidationError("analysis.tv_max must lie in (0, 1]");
  }
  if (!(a.thresholds.p_min >= 0.0 && a.thresholds.p_min < 1.0)) {
    throw ValidationError("analysis.p_min must lie in [0, 1)");
  }
  if (a.identity_states < 0) throw ValidationError("analysis.identity_states must be nonnegative");
  return a;
}

OutputSection parse_output(Section s) {
  OutputSection o;
  o.directory = s.string("directory", o.directory.string());
  if (s.has("formats")) {
    const json& list = s.get("formats");
    if (!list.is_array()) throw ValidationError("output.formats must be an array of strings");
    o.formats.clear();
    for (const auto& f : list) {
      if (!f.is_string()) throw ValidationError("output.formats must be an array of strings");
      const auto name = f.get<std::string>();
      if (name != "json" && name != "csv" && name != "jsonl") {
        throw ValidationError("output.formats entries must be \"json\", \"csv\" or \"jsonl\"");
      }
      o.formats.insert(name);
    }
  }
  s.finish();
  return o;
}

}  // namespace

ProcessSettings RunConfig::process_settings() const {
  ProcessSettings s;
  s.mode = process.mode;
  s.dt = process.dt;
  s.t_final = propagator.t_final;
  s.sample_times = propagator.sample_times;
  s.jitter = process.jitter;
  return s;
}

std::string config_hash(const nlohmann::json& doc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : doc.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

RunConfig parse_config(const nlohmann::json& doc) {
  Section root(doc, "");
  RunConfig cfg;
  if (!root.has("model")) throw ValidationError("missing required section 'model'");
  cfg.model = parse_model(root.sub("model"));
  if (root.has("initial_state")) parse_initial(root.sub("initial_state"), cfg);
  if (root.has("propagator")) cfg.propagator = parse_propagator(root.sub("propagator"));
  if (root.has("process")) cfg.process = parse_process(root.sub("process"));
  if (root.has("analysis")) cfg.analysis = parse_analysis(root.sub("analysis"));
  if (root.has("output")) cfg.output = parse_output(root.sub("output"));
  root.finish();
  cfg.raw = doc;
  cfg.hash = config_hash(doc);
  return cfg;
}

nlohmann::json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigFileError("cannot open config file '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

}  // namespace bellqft::cli
