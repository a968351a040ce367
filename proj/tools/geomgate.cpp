#include <CLI11.hpp>
#include <geomgate/geomgate.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifndef GEOMGATE_VERSION
#define GEOMGATE_VERSION "dev"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace geomgate;

namespace {

// JSON run configuration: top-level keys are global options, nested objects hold subcommand options
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    return echo(app, default_also).dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& is) const override {
    json j;
    try {
      is >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config must be a JSON object");
    std::vector<CLI::ConfigItem> out;
    flatten(j, {}, out);
    return out;
  }

  static json echo(const CLI::App* app, bool default_also) {
    json j = json::object();
    for (const CLI::Option* o : app->get_options()) {
      if (o->get_lnames().empty()) continue;
      const std::string name = o->get_lnames().front();
      if (name == "help" || name == "config") continue;
      if (o->get_type_size() == 0) {
        j[name] = o->count() > 0;
        continue;
      }
      std::vector<std::string> v = o->results();
      if (v.empty()) {
        if (!default_also || o->get_default_str().empty()) continue;
        v = {o->get_default_str()};
      }
      if (v.size() == 1)
        j[name] = typed(v.front());
      else
        for (const auto& s : v) j[name].push_back(typed(s));
    }
    for (const CLI::App* sub : app->get_subcommands())
      if (sub->parsed()) j[sub->get_name()] = echo(sub, default_also);
    return j;
  }

 private:
  static json typed(const std::string& s) {
    std::istringstream a(s), b(s);
    long long i;
    if (a >> i && a.eof()) return i;
    double x;
    if (b >> x && b.eof()) return x;
    return s;
  }

  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void flatten(const json& j, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, v] : j.items()) {
      if (v.is_object()) {
        auto p = parents;
        p.push_back(key);
        out.push_back({p, "++", {}});   // opens the subcommand section
        flatten(v, p, out);
        out.push_back({p, "--", {}});
        continue;
      }
      CLI::ConfigItem item{parents, key, {}};
      if (v.is_array())
        for (const auto& e : v) item.inputs.push_back(scalar(e));
      else
        item.inputs.push_back(scalar(v));
      out.push_back(std::move(item));
    }
  }
};

struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::string device_file;
  std::string out_dir = "results";
  std::uint64_t seed = 0;
  int jobs = 0;
  long shots = 0;
  std::optional<double> rabi_error;
  std::optional<double> detuning_mhz;
};

struct GateArgs {
  std::string scheme = "sp-ngqc";
  std::string target = "H";
  std::optional<double> theta, phi, gamma;
};

struct SimArgs {
  int levels = 2;
  std::string envelope = "cosine";
  double drag = 1.0;
  bool virtual_detuning = false;
  double dt = 0.02;
};

class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) throw ConfigError("cannot create output directory " + dir_.string());
    const fs::path probe = dir_ / ".write_probe";
    std::ofstream f(probe);
    if (!f) throw ConfigError("output directory is not writable: " + dir_.string());
    f.close();
    fs::remove(probe, ec);
  }

  void write(const std::string& name, const std::string& text) {
    std::ofstream f(dir_ / name, std::ios::binary);
    f << text;
    if (!f) throw std::runtime_error("failed to write " + name);
    files_.push_back(name);
  }

  template <class F>
  void csv(const std::string& name, F&& writer) {
    std::ostringstream os;
    writer(os);
    write(name, os.str());
  }

  void json_file(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  const std::vector<std::string>& files() const { return files_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

int effective_jobs(int flag) {
  if (std::getenv("GEOMGATE_JOBS")) return default_jobs();
  return resolve_jobs(flag);
}

DeviceModel load_device(const GlobalOptions& g) {
  DeviceModel d = default_device();
  if (!g.device_file.empty()) {
    std::ifstream f(g.device_file);
    if (!f) throw ConfigError("cannot open device file " + g.device_file);
    try {
      d = device_from_json(json::parse(f));
    } catch (const json::exception& e) {
      throw ConfigError(std::string("device file: ") + e.what());
    }
  }
  if (g.rabi_error) d.noise.rabi_error = *g.rabi_error;
  if (g.detuning_mhz) d.noise.detuning_error = mhz(*g.detuning_mhz);
  d.validate();
  return d;
}

GateSpec resolve_gate(const GateArgs& a) {
  const Scheme s = scheme_from_string(a.scheme);
  GateSpec g{0.0, 0.0, 0.0, s};
  if (a.target != "custom") {
    try {
      g = named_gate(a.target, s);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (a.theta) g.theta = *a.theta;
  if (a.phi) g.phi = *a.phi;
  if (a.gamma) g.gamma = *a.gamma;
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return g;
}

CompileOptions compile_options(const SimArgs& s) {
  CompileOptions c;
  c.envelope = envelope_from_string(s.envelope);
  c.drag = s.drag;
  c.virtual_detuning = s.virtual_detuning;
  return c;
}

PropagationOptions propagation_options(const SimArgs& s, const DeviceModel& d) {
  if (s.levels != 2 && s.levels != 3) throw ConfigError("levels must be 2 or 3");
  if (!(s.dt > 0)) throw ConfigError("dt must be positive");
  return {s.levels, s.dt, d.qubit_a.anharmonicity};
}

// "1..30", "1..300:10", "1,2,5", or a mixture
std::vector<int> parse_lengths(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string part;
  try {
    while (std::getline(ss, part, ',')) {
      const auto dots = part.find("..");
      if (dots == std::string::npos) {
        out.push_back(std::stoi(part));
        continue;
      }
      const auto colon = part.find(':', dots);
      const int a = std::stoi(part.substr(0, dots));
      const int b = std::stoi(part.substr(dots + 2, colon == std::string::npos ? std::string::npos : colon - dots - 2));
      const int step = colon == std::string::npos ? 1 : std::stoi(part.substr(colon + 1));
      if (step < 1) throw ConfigError("length step must be positive");
      for (int m = a; m <= b; m += step) out.push_back(m);
    }
  } catch (const std::logic_error&) {
    throw ConfigError("cannot parse lengths: " + text);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty() || out.front() < 1) throw ConfigError("lengths must be positive integers");
  return out;
}

std::vector<Scheme> parse_schemes(const std::vector<std::string>& names) {
  if (names.empty() || (names.size() == 1 && names[0] == "all")) return {Scheme::SpNgqc, Scheme::Ngqc, Scheme::Dynamical};
  std::vector<Scheme> out;
  for (const auto& n : names) out.push_back(scheme_from_string(n));
  return out;
}

// ---- subcommands ----

struct GateCmd {
  GateArgs gate;
  SimArgs sim;
  bool decoherence = false;
  double rate = 1.0;

  void run(const GlobalOptions& g, Outputs& out) const {
    const DeviceModel d = load_device(g);
    const GateSpec spec = resolve_gate(gate);
    const PulseSchedule p = compile(spec, compile_options(sim));
    const PropagationOptions po = propagation_options(sim, d);
    const ComplexMatrix u = propagate_unitary(p, d.noise, po);
    const ComplexMatrix target = target_unitary(spec);
    json r{{"scheme", to_string(spec.scheme)},
           {"theta", spec.theta},
           {"phi", spec.phi},
           {"gamma", spec.gamma},
           {"segments", p.segments.size()},
           {"duration_ns", p.total_duration()},
           {"unitary_fidelity", unitary_fidelity(qubit_block(u), target)},
           {"leakage", leakage(u)}};
    if (decoherence) {
      const LindbladModel lind = transmon_decoherence(sim.levels, d.qubit_a.t1, d.qubit_a.t2star);
      const ComplexMatrix s = computational_block_superop(channel_superop(p, d.noise, lind, po), sim.levels, {0, 1});
      r["channel_fidelity"] = std::sqrt(std::max(0.0, process_fidelity(s, target)));
    }
    out.json_file("gate.json", r);
    out.csv("waveform.csv", [&](std::ostream& os) { write_waveform_csv(os, sample_waveform(p, rate, d.qubit_a.anharmonicity)); });
  }
};

struct SweepCmd {
  GateArgs gate;
  SimArgs sim;
  std::string error = "rabi";
  std::vector<std::string> schemes{"all"};
  std::string engine = "unitary";
  std::vector<double> values;
  std::optional<double> min, max;
  int points = 41;

  void run(const GlobalOptions& g, Outputs& out) const {
    const DeviceModel d = load_device(g);
    SweepSpec spec;
    spec.gate = resolve_gate(gate);
    spec.error_axis = error_axis_from_string(error);
    spec.schemes = parse_schemes(schemes);
    spec.engine = engine_from_string(engine);
    spec.options.compile = compile_options(sim);
    spec.options.propagation = propagation_options(sim, d);
    spec.options.qubit = d.qubit_a;
    spec.options.jobs = effective_jobs(g.jobs);
    const bool det = spec.error_axis == ErrorAxis::Detuning;
    std::vector<double> v = values;
    if (v.empty()) {
      const double lim = det ? 2.0 : 0.2;
      if (points < 1) throw ConfigError("points must be positive");
      v = linspace(min.value_or(-lim), max.value_or(lim), points);
    }
    for (double& x : v)
      if (det) x = mhz(x);   // detuning is given in MHz
    spec.values = v;
    const auto rows = sweep(spec);
    out.csv("sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, rows); });
  }
};

struct LandscapeCmd {
  double eps = 0.2;
  std::string pair = "both";
  int theta_points = 32;
  int gamma_points = 32;
  bool z_rotation = false;
  double z_detuning_mhz = 2.0;
  int z_points = 64;
  SimArgs sim;

  void run(const GlobalOptions& g, Outputs& out) const {
    if (theta_points < 1 || gamma_points < 1 || z_points < 1) throw ConfigError("grid sizes must be positive");
    const int jobs = effective_jobs(g.jobs);
    const auto thetas = linspace(0.0, kPi / 2, theta_points);
    const auto gammas = linspace(kTwoPi / gamma_points, kTwoPi, gamma_points);
    std::vector<LandscapePair> pairs;
    if (pair == "both")
      pairs = {LandscapePair::SpVsNgqc, LandscapePair::SpVsDyn};
    else
      pairs = {landscape_pair_from_string(pair)};
    for (auto p : pairs) {
      const Landscape l = landscape(eps, thetas, gammas, p, jobs);
      out.csv("landscape_" + to_string(p) + ".csv", [&](std::ostream& os) { write_landscape_csv(os, l); });
    }
    if (!z_rotation) return;
    const DeviceModel d = load_device(g);
    RobustnessOptions o;
    o.compile = compile_options(sim);
    o.propagation = propagation_options(sim, d);
    o.jobs = jobs;
    const auto zg = linspace(kTwoPi / z_points, kTwoPi, z_points);
    const auto rabi = z_rotation_comparison(ErrorAxis::RabiEps, eps, zg, o);
    out.csv("z_rotation_rabi.csv", [&](std::ostream& os) { write_z_rotation_csv(os, rabi); });
    const auto det = z_rotation_comparison(ErrorAxis::Detuning, mhz(z_detuning_mhz), zg, o);
    out.csv("z_rotation_detuning.csv", [&](std::ostream& os) { write_z_rotation_csv(os, det); });
  }
};

struct RbCmd {
  std::string variant = "reference";
  int qubits = 1;
  std::string interleave;
  std::string lengths;
  int k = 30;
  std::string model = "native";
  double p = 0.99;
  double gate_p = 0.99;
  std::string scheme = "sp-ngqc";
  bool no_decoherence = false;
  double purity_gates = 0.0;
  double max_time = 30000.0;

  RBModel build(const DeviceModel& d, int n) const {
    std::optional<ComplexMatrix> ideal;
    if (!interleave.empty()) {
      if (n == 2) {
        if (interleave != "CZ") throw ConfigError("two-qubit RB interleaves CZ only");
        ideal = cz_matrix();
      } else {
        ideal = target_unitary(named_gate(interleave));
      }
    }
    if (model == "depolarizing") return depolarizing_model(n, p, ideal, gate_p);
    if (model != "native") throw ConfigError("unknown RB model: " + model);
    NativeRBOptions o;
    o.scheme = scheme_from_string(scheme);
    o.decoherence = !no_decoherence;
    if (n == 1) {
      RBModel m = native_single_qubit_model(d, o);
      if (ideal) {
        GateSpec spec = named_gate(interleave, o.scheme);
        const PulseSchedule sched = compile(spec, o.compile);
        const PropagationOptions po{3, o.dt, d.qubit_a.anharmonicity};
        const LindbladModel lind = o.decoherence ? transmon_decoherence(3, d.qubit_a.t1, d.qubit_a.t2star) : LindbladModel{};
        const ComplexMatrix s = channel_superop(sched, d.noise, lind, po);
        m.interleaved_ideal = ideal;
        m.interleaved = [s](ComplexMatrix& rho) { rho = apply_superop(s, rho); };
        m.interleaved_duration = sched.total_duration();
      }
      return m;
    }
    const CZSchedule s = calibrate_cz(d).schedule;
    const CZChannel ch = o.decoherence ? cz_lindblad_channel(s, d) : cz_lindblad_channel(s, d, 0.1, LindbladModel{});
    return native_two_qubit_model(d, ch.superop, s.total_duration(), o);
  }

  void run(const GlobalOptions& g, Outputs& out) const {
    const int n = interleave == "CZ" ? 2 : qubits;
    if (n != 1 && n != 2) throw ConfigError("RB supports one or two qubits");
    if (variant != "reference" && variant != "interleaved" && variant != "leakage" && variant != "purity")
      throw ConfigError("unknown RB variant: " + variant);
    std::string gate_name = interleave;
    if (variant == "interleaved" && gate_name.empty()) throw ConfigError("interleaved RB needs --interleave");
    const DeviceModel d = load_device(g);
    const RBModel m = build(d, n);
    const bool inter = variant == "interleaved" || (variant == "leakage" && m.interleaved_ideal);

    RBConfig c;
    c.lengths = lengths.empty() ? rb_lengths_for_budget(m, inter, 10, n == 1 ? 300 : 100, max_time) : parse_lengths(lengths);
    c.sequences = k;
    c.seed = g.seed;
    c.shots = g.shots;
    c.max_sequence_time = max_time;
    c.jobs = effective_jobs(g.jobs);
    c.validate();
    if (c.lengths.size() < 4) throw ConfigError("RB needs at least four distinct lengths");

    json r{{"variant", variant}, {"qubits", n}, {"model", model}, {"lengths", c.lengths}, {"sequences", k}, {"seed", g.seed}};
    std::vector<RBResult> results;
    try {
      if (variant == "reference" || variant == "interleaved") {
        c.interleaved = false;
        results.push_back(rb_run(c, m));
        r["reference"] = rb_fit_to_json(results.back(), n);
        if (variant == "interleaved") {
          c.interleaved = true;
          results.push_back(rb_run(c, m));
          r["interleaved"] = rb_fit_to_json(results.back(), n);
          r["gate"] = gate_name;
          r["gate_fidelity"] = interleaved_fidelity(results[0], results[1], n);
        }
      } else if (variant == "leakage") {
        const LeakageRBResult l = leakage_rb(c, m);
        results.push_back(l.reference);
        r["reference"] = rb_fit_to_json(l.reference, n);
        if (l.interleaved) {
          results.push_back(*l.interleaved);
          r["interleaved"] = rb_fit_to_json(*l.interleaved, n);
          r["l1_interleaved"] = l.l1_int;
        }
        r["l1_reference"] = l.l1_ref;
        r["l1_gate"] = l.l1_gate;
      } else {
        const PurityRBResult pr = purity_rb(c, m, purity_gates);
        results.push_back(pr.fit);
        r["purity"] = rb_fit_to_json(pr.fit, n);
        r["gamma"] = pr.gamma;
        r["gamma_error"] = pr.gamma_error;
        r["incoherent_error"] = pr.incoherent_error;
      }
    } catch (const RBFitError& e) {
      out.csv("rb.csv", [&](std::ostream& os) { write_rb_csv(os, results); });
      throw NumericalFailure(e.what());
    }
    out.csv("rb.csv", [&](std::ostream& os) { write_rb_csv(os, results); });
    out.json_file("rb.json", r);
  }
};

struct QptCmd {
  GateArgs gate;
  SimArgs sim{3};
  bool mle = false;
  bool no_decoherence = false;

  void run(const GlobalOptions& g, Outputs& out) const {
    const DeviceModel d = load_device(g);
    MeasurementOptions mo;
    mo.shots = g.shots;
    mo.seed = g.seed;
    ProcessMatrix chi;
    ComplexMatrix target;
    double duration = 0.0;
    int n = 1;
    if (gate.target == "CZ") {
      n = 2;
      const CZSchedule s = calibrate_cz(d).schedule;
      const CZChannel ch = no_decoherence ? cz_lindblad_channel(s, d, 0.1, LindbladModel{}) : cz_lindblad_channel(s, d);
      chi = qpt([&](const ComplexMatrix& r) { return unvec(ch.computational * vec(r), 4); }, 2, mo);
      target = cz_matrix();
      duration = s.total_duration();
    } else {
      const GateSpec spec = resolve_gate(gate);
      const PulseSchedule p = compile(spec, compile_options(sim));
      const PropagationOptions po = propagation_options(sim, d);
      const LindbladModel lind =
          no_decoherence ? LindbladModel{} : transmon_decoherence(sim.levels, d.qubit_a.t1, d.qubit_a.t2star);
      const ComplexMatrix s = computational_block_superop(channel_superop(p, d.noise, lind, po), sim.levels, {0, 1});
      chi = qpt([&](const ComplexMatrix& r) { return unvec(s * vec(r), 2); }, 1, mo);
      target = target_unitary(spec);
      duration = p.total_duration();
    }
    if (mle) chi = mle_project(chi);
    const ErrorAnalysis a = analyze_errors(chi, target, duration, d);
    json r{{"gate", gate.target},
           {"qubits", n},
           {"shots", g.shots},
           {"mle", mle},
           {"duration_ns", duration},
           {"process_fidelity", process_fidelity(chi, chi_from_unitary(target))},
           {"budget", budget_to_json(a.budget)}};
    if (n == 1) r.erase("budget");
    out.csv("chi.csv", [&](std::ostream& os) { write_chi_csv(os, chi); });
    out.csv("chi_bars.csv", [&](std::ostream& os) { write_chi_bars_csv(os, chi); });
    out.csv("error_chi.csv", [&](std::ostream& os) { write_chi_bars_csv(os, a.chi_err); });
    out.json_file("qpt.json", r);
  }
};

struct CzCmd {
  std::string model = "effective";
  int trajectory_every = 50;

  void run(const GlobalOptions& g, Outputs& out) const {
    const DeviceModel d = load_device(g);
    CZCalibrationOptions co;
    if (model == "full")
      co.model = CZModel::Full;
    else if (model != "effective")
      throw ConfigError("unknown CZ model: " + model);
    CZCalibration cal;
    try {
      cal = calibrate_cz(d, co);
    } catch (const CalibrationError& e) {
      throw NumericalFailure(e.what());
    }
    CZOptions so;
    so.model = co.model;
    so.dt = co.dt;
    so.sample_every = std::max(1, trajectory_every);
    const CZResult res = simulate_cz(cal.schedule, d, so);
    json r = calibration_to_json(cal, d);
    r["cz_fidelity"] = cz_process_fidelity(res.computational);
    r["ramsey_conditional_phase_rad"] = conditional_phase_experiment(cal.schedule, d, so);
    CZOptions two = so;
    two.stages = 2;
    two.sample_every = 0;
    r["ramsey_conditional_phase_stages12_rad"] = conditional_phase_experiment(cal.schedule, d, two);
    out.json_file("cz.json", r);
    out.csv("cz_trajectory.csv", [&](std::ostream& os) { write_cz_trajectory_csv(os, res.trajectory); });
    out.csv("cz_stage2_sweep.csv", [&](std::ostream& os) {
      char buf[96];
      os << "stage2_ns,phase_rad\n";
      for (const auto& [t, ph] : cal.stage2_sweep) {
        std::snprintf(buf, sizeof buf, "%.6f,%.12f\n", t, ph);
        os << buf;
      }
    });
  }
};

struct ErfCzCmd {
  double delta0_mhz = 10.0;
  double a0 = 1.0;
  double sigma = 3.0;

  void run(const GlobalOptions& g, Outputs& out) const {
    const DeviceModel d = load_device(g);
    const ErfCZParams p = tune_erf_cz(d, mhz(delta0_mhz), a0, sigma);
    const ErfCZResult r = simulate_erf_cz(p, d);
    json j{{"delta0_mhz", delta0_mhz},   {"a0", p.a0},
           {"offset", p.offset},         {"sigma_ns", p.sigma},
           {"t_b_ns", p.t_b},            {"t_c_ns", p.t_c},
           {"t_b1_ns", p.t_b1},          {"t_c1_ns", p.t_c1},
           {"on_off_ratio", p.on_off_ratio()},
           {"duration_ns", p.total_duration()},
           {"fidelity", r.fidelity},
           {"rotating_frame_fidelity", r.rotating_frame_fidelity},
           {"conditional_phase_rad", r.conditional_phase},
           {"leakage", r.leakage},
           {"detuning_area_rad", r.detuning_area}};
    out.json_file("erf_cz.json", j);
    out.csv("erf_cz_waveform.csv", [&](std::ostream& os) { write_erf_cz_csv(os, erf_cz_waveform(p)); });
  }
};

void add_gate_args(CLI::App* app, GateArgs& a) {
  app->add_option("--scheme", a.scheme, "sp-ngqc, ngqc or dyn")->capture_default_str();
  app->add_option("--target,--gate", a.target, "X, Y, Z, H, X2, Y2, S, T (suffix m inverts) or custom")->capture_default_str();
  app->add_option("--theta", a.theta, "rotation axis polar angle (rad)");
  app->add_option("--phi", a.phi, "rotation axis azimuth (rad)");
  app->add_option("--gamma", a.gamma, "rotation angle (rad)");
}

void add_sim_args(CLI::App* app, SimArgs& s) {
  app->add_option("--levels", s.levels, "transmon levels (2 or 3)")->capture_default_str();
  app->add_option("--envelope", s.envelope, "cosine, constant or erf")->capture_default_str();
  app->add_option("--drag", s.drag, "DRAG coefficient")->capture_default_str();
  app->add_flag("--virtual-detuning", s.virtual_detuning, "SP-NGQC detuned segment as a frame change");
  app->add_option("--dt", s.dt, "integration step (ns)")->capture_default_str();
}

void write_manifest(const fs::path& dir, const CLI::App& app, const std::string& command, const GlobalOptions& g,
                    const std::vector<std::string>& files, double seconds, const std::string& status,
                    const std::string& error) {
  json m{{"command", command},
         {"version", GEOMGATE_VERSION},
         {"config", JsonConfig::echo(&app, true)},
         {"seed", g.seed},
         {"jobs", effective_jobs(g.jobs)},
         {"wall_time_s", seconds},
         {"outputs", files},
         {"status", status}};
  if (!error.empty()) m["error"] = error;
  std::ofstream f(dir / "manifest.json", std::ios::binary);
  f << m.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometric-gate transmon simulator"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON run configuration; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--device", g.device_file, "device JSON");
  app.add_option("--out", g.out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", g.seed, "master seed")->capture_default_str();
  app.add_option("--jobs", g.jobs, "worker threads (0: all cores; GEOMGATE_JOBS overrides)")->capture_default_str();
  app.add_option("--shots", g.shots, "measurement shots (0: exact)")->capture_default_str()->check(CLI::NonNegativeNumber);
  app.add_option("--rabi-error", g.rabi_error, "relative drive amplitude error");
  app.add_option("--detuning-mhz", g.detuning_mhz, "qubit frequency shift (MHz)");

  GateCmd gate;
  auto* gate_app = app.add_subcommand("gate", "compile and simulate one single-qubit gate");
  add_gate_args(gate_app, gate.gate);
  add_sim_args(gate_app, gate.sim);
  gate_app->add_flag("--decoherence", gate.decoherence, "also report the Lindblad channel fidelity");
  gate_app->add_option("--rate", gate.rate, "waveform sample rate (GS/s)")->capture_default_str();

  SweepCmd sw;
  auto* sweep_app = app.add_subcommand("sweep", "fidelity against amplitude or detuning error");
  add_gate_args(sweep_app, sw.gate);
  add_sim_args(sweep_app, sw.sim);
  sweep_app->add_option("--error", sw.error, "rabi or detuning")->capture_default_str();
  sweep_app->add_option("--schemes", sw.schemes, "all, or a comma-separated list")->delimiter(',')->capture_default_str();
  sweep_app->add_option("--engine", sw.engine, "analytic, unitary or lindblad")->capture_default_str();
  sweep_app->add_option("--values", sw.values, "error values (relative, or MHz for detuning)")->delimiter(',');
  sweep_app->add_option("--min", sw.min, "lower end of the default grid");
  sweep_app->add_option("--max", sw.max, "upper end of the default grid");
  sweep_app->add_option("--points", sw.points, "grid points")->capture_default_str();

  LandscapeCmd ls;
  auto* land_app = app.add_subcommand("landscape", "fidelity-difference landscape over (theta, gamma)");
  land_app->add_option("--eps", ls.eps, "relative amplitude error")->capture_default_str();
  land_app->add_option("--pair", ls.pair, "sp_vs_ngqc, sp_vs_dyn or both")->capture_default_str();
  land_app->add_option("--theta-points", ls.theta_points)->capture_default_str();
  land_app->add_option("--gamma-points", ls.gamma_points)->capture_default_str();
  land_app->add_flag("--z-rotation", ls.z_rotation, "also compare Z rotations");
  land_app->add_option("--z-detuning-mhz", ls.z_detuning_mhz)->capture_default_str();
  land_app->add_option("--z-points", ls.z_points)->capture_default_str();
  add_sim_args(land_app, ls.sim);

  RbCmd rb;
  auto* rb_app = app.add_subcommand("rb", "randomized benchmarking");
  rb_app->add_option("--variant", rb.variant, "reference, interleaved, leakage or purity")->capture_default_str();
  rb_app->add_option("--qubits", rb.qubits)->capture_default_str();
  rb_app->add_option("--interleave", rb.interleave, "interleaved gate (CZ, or a single-qubit Clifford name)");
  rb_app->add_option("--lengths", rb.lengths, "e.g. 1..30, 1..300:10 or 1,2,4,8");
  rb_app->add_option("--k", rb.k, "random sequences per length")->capture_default_str();
  rb_app->add_option("--model", rb.model, "native or depolarizing")->capture_default_str();
  rb_app->add_option("--p", rb.p, "depolarizing parameter per Clifford")->capture_default_str();
  rb_app->add_option("--gate-p", rb.gate_p, "depolarizing parameter of the interleaved gate")->capture_default_str();
  rb_app->add_option("--scheme", rb.scheme, "native single-qubit scheme")->capture_default_str();
  rb_app->add_flag("--no-decoherence", rb.no_decoherence);
  rb_app->add_option("--purity-gates", rb.purity_gates, "gates per Clifford for purity RB (0: default)");
  rb_app->add_option("--max-time", rb.max_time, "longest allowed sequence (ns)")->capture_default_str();

  QptCmd qc;
  auto* qpt_app = app.add_subcommand("qpt", "process tomography of a simulated gate");
  add_gate_args(qpt_app, qc.gate);
  add_sim_args(qpt_app, qc.sim);
  qpt_app->add_flag("--mle", qc.mle, "project onto CPTP maps");
  qpt_app->add_flag("--no-decoherence", qc.no_decoherence);

  CzCmd cz;
  auto* cz_app = app.add_subcommand("cz", "calibrate the parametric CZ");
  cz_app->add_option("--model", cz.model, "effective or full")->capture_default_str();
  cz_app->add_option("--trajectory-every", cz.trajectory_every, "integration steps per trajectory sample")
      ->capture_default_str();

  ErfCzCmd ec;
  auto* erf_app = app.add_subcommand("erf-cz", "tune and simulate the erf-pulse CZ");
  erf_app->add_option("--delta0-mhz", ec.delta0_mhz)->capture_default_str();
  erf_app->add_option("--a0", ec.a0)->capture_default_str();
  erf_app->add_option("--sigma", ec.sigma)->capture_default_str();

  for (CLI::App* sub : app.get_subcommands({})) sub->configurable();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const CLI::App* chosen = app.get_subcommands().front();
  const std::string command = chosen->get_name();
  const auto t0 = std::chrono::steady_clock::now();
  auto seconds = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  std::optional<Outputs> out;
  try {
    out.emplace(g.out_dir);
    if (command == "gate") gate.run(g, *out);
    else if (command == "sweep") sw.run(g, *out);
    else if (command == "landscape") ls.run(g, *out);
    else if (command == "rb") rb.run(g, *out);
    else if (command == "qpt") qc.run(g, *out);
    else if (command == "cz") cz.run(g, *out);
    else if (command == "erf-cz") ec.run(g, *out);
  } catch (const std::invalid_argument& e) {
    // ConfigError and argument validation
    std::cerr << "geomgate " << command << ": invalid configuration: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "geomgate " << command << ": numerical failure: " << e.what() << "\n";
    if (out) write_manifest(out->dir(), app, command, g, out->files(), seconds(), "failed", e.what());
    return 2;
  }
  write_manifest(out->dir(), app, command, g, out->files(), seconds(), "ok", "");
  return 0;
}
