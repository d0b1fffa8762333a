// smanifold command-line front end.
// Exit codes: 0 ok/pass, 1 load or usage error, 2 a check failed, 3 inconclusive with no failure.
#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "smanifold/examples.hpp"
#include "smanifold/hypotheses.hpp"
#include "smanifold/integrate.hpp"
#include "smanifold/manifolds.hpp"
#include "smanifold/system_io.hpp"

using namespace smanifold;

namespace {

struct Config {
  std::string system = "example-ok";
  std::string u0;
  std::optional<double> t_end;
  std::optional<double> tau_end;
  std::vector<std::string> params;
  double rtol = 1e-10;
  double atol = 1e-12;
  std::optional<double> delta;
  std::string out;
  std::string format = "csv";
  std::uint64_t seed = 12345;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

SingularSystem load(const Config& c) {
  if (is_builtin(c.system)) return builtin_system(c.system);
  return load_system_json(c.system);
}

Vec parse_vec(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("cannot parse number '" + item + "' in --u0");
    }
  }
  Vec out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = v[i];
  return out;
}

Vec initial_state(const Config& c, const SingularSystem& sys) {
  if (c.u0.empty()) throw UsageError("--u0 is required");
  Vec u = parse_vec(c.u0);
  if (u.size() != sys.dim) throw UsageError("--u0 has " + std::to_string(u.size()) + " entries, system needs " + std::to_string(sys.dim));
  return u;
}

void emit(const Config& c, const std::string& text) {
  if (c.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(c.out, std::ios::binary);
  if (!f) throw IoError("cannot write " + c.out);
  f << text;
}

// Summaries go to stdout unless the data itself does.
std::ostream& info(const Config& c) { return c.out.empty() ? std::cerr : std::cout; }

// name=start:stop:count[:log], or name=v1,v2,...
struct Axis {
  std::string name;
  std::vector<double> values;
};

Axis parse_axis(const std::string& spec) {
  auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("--param needs name=values, got '" + spec + "'");
  Axis a;
  a.name = spec.substr(0, eq);
  std::string rest = spec.substr(eq + 1);
  auto num = [&](const std::string& s) {
    try {
      return std::stod(s);
    } catch (const std::exception&) {
      throw UsageError("bad number '" + s + "' in --param " + spec);
    }
  };
  if (rest.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(rest);
    std::string p;
    while (std::getline(ss, p, ':')) parts.push_back(p);
    if (parts.size() < 3 || parts.size() > 4) throw UsageError("--param range is start:stop:count[:log]");
    double lo = num(parts[0]), hi = num(parts[1]);
    int n = static_cast<int>(num(parts[2]));
    bool log = parts.size() == 4 && parts[3] == "log";
    if (log && (lo <= 0 || hi <= 0)) throw UsageError("log range needs positive ends");
    for (int i = 0; i < n; ++i) {
      double s = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
      a.values.push_back(log ? lo * std::pow(hi / lo, s) : lo + (hi - lo) * s);
    }
  } else if (!rest.empty()) {
    std::stringstream ss(rest);
    std::string p;
    while (std::getline(ss, p, ',')) a.values.push_back(num(p));
  }
  return a;
}

std::optional<double> param_value(const Config& c, const std::string& name) {
  for (const auto& s : c.params) {
    Axis a = parse_axis(s);
    if (a.name == name && !a.values.empty()) return a.values.front();
  }
  return std::nullopt;
}

NormalForm build_nf(const Config& c, const SingularSystem& sys) {
  NormalFormOptions o;
  if (c.delta) o.delta = *c.delta;
  o.seed = c.seed;
  if (auto w = param_value(c, "waive_slow")) o.waive_slow = *w != 0.0;
  return normal_form(sys, o);
}

int cmd_check(const Config& c) {
  SingularSystem sys = load(c);
  CheckConfig cfg;
  cfg.rng_seed = c.seed;
  if (c.delta) cfg.radius = *c.delta;
  std::optional<Vec> u0;
  if (!c.u0.empty()) u0 = initial_state(c, sys);
  HypothesisReport rep = check_all(sys, u0, cfg);
  emit(c, rep.to_json());
  auto& os = info(c);
  for (const auto& r : rep.records) os << r.id << "  " << status_name(r.status) << (r.note.empty() ? "" : "  " + r.note) << "\n";
  os << "overall " << status_name(rep.overall) << "\n";
  for (const auto& r : rep.records)
    if (r.status == Status::fail) return 2;
  return rep.overall == Status::pass ? 0 : 3;
}

IntegrateOptions integrate_options(const Config& c) {
  IntegrateOptions io;
  io.rtol = c.rtol;
  io.atol = c.atol;
  if (auto b = param_value(c, "blowup_threshold")) io.blowup_threshold = *b;
  if (auto l = param_value(c, "loc_tol")) io.loc_tol = *l;
  return io;
}

int cmd_integrate(const Config& c) {
  SingularSystem sys = load(c);
  Vec u0 = initial_state(c, sys);
  if (c.t_end && c.tau_end) throw UsageError("give only one of --t-end and --tau-end");
  IntegrateOptions io = integrate_options(c);
  Trajectory tr = c.tau_end ? integrate_tau(sys, u0, *c.tau_end, io) : integrate_t(sys, u0, c.t_end.value_or(1.0), io);
  if (c.format == "json")
    emit(c, trajectory_to_json(tr));
  else if (c.format == "csv")
    emit(c, trajectory_to_csv(tr));
  else
    throw UsageError("--format must be csv or json");
  auto& os = info(c);
  os << "events " << tr.events.size() << "\n";
  for (const auto& e : tr.events) os << e.kind << "  " << format_double(e.time) << "  " << format_double(e.detail) << "\n";
  return 0;
}

int cmd_manifold(const Config& c) {
  SingularSystem sys = load(c);
  NormalForm nf = build_nf(c, sys);
  int n = static_cast<int>(param_value(c, "n").value_or(5));
  double radius = param_value(c, "radius").value_or(0.25 * nf.delta);
  emit(c, manifold_samples_csv(nf, n, radius, ContractionOptions{}));
  info(c) << "n0 " << nf.n0 << "  n_minus " << nf.n_minus << "  c " << format_double(nf.c) << "  reassembly "
          << format_double(nf.reassembly_error) << "\n";
  return 0;
}

int cmd_decompose(const Config& c) {
  SingularSystem sys = load(c);
  NormalForm nf = build_nf(c, sys);
  ContractionOptions co;
  if (c.tau_end) co.t_max = *c.tau_end;
  Vec u0;
  if (!c.u0.empty()) {
    u0 = initial_state(c, sys);
  } else {
    // A point of the uniformly stable manifold from anchor zeta and fast amplitude.
    Vec anchor = Vec::Zero(nf.n_center());
    anchor[0] = param_value(c, "zeta").value_or(0.03);
    Vec xm = Vec::Constant(nf.n_minus, param_value(c, "xm").value_or(0.02));
    u0 = uniformly_stable_point(nf, anchor, xm, co).u;
  }
  OrbitDecomposition d = decompose_from(nf, u0, co);
  emit(c, decomposition_csv(d));
  auto& os = info(c);
  double bound = d.k_p * std::abs(d.zeta_sl0) * d.u_minus0;
  bool pert_ok = d.pert0 <= bound * (1 + 1e-12) + 1e-15;
  if (d.slow_only) os << "slow-only\n";
  os << "rate_fast " << format_double(d.fast_fit.rate) << "  bound " << format_double(-d.c / 2 + 0.1 * d.c) << "  "
     << (d.fast_rate_ok ? "pass" : "fail") << "\n";
  os << "rate_pert " << format_double(d.pert_fit.rate) << "  bound " << format_double(-d.c / 4 + 0.1 * d.c) << "  "
     << (d.pert_rate_ok ? "pass" : "fail") << "\n";
  os << "zeta_infinity " << format_double(d.zeta_infinity) << "\n";
  os << "pert0 " << format_double(d.pert0) << "  k_p*|zeta_sl(0)|*|U-(0)| " << format_double(bound) << "  "
     << (pert_ok ? "pass" : "fail") << "\n";
  os << "reconstruction " << format_double(d.reconstruction_error) << "\n";
  return d.fast_rate_ok && d.pert_rate_ok && pert_ok ? 0 : 2;
}

int cmd_toy(const Config& c) {
  ToyLinearModel m = default_toy_model();
  double z = param_value(c, "zeta").value_or(0.01);
  ToySubspaces s = toy_track_subspaces(m, z);
  ToyDecay dm = toy_decay_check(m, z, s.M_minus.col(0));
  std::ostringstream os;
  os << "zeta,dim_Ms,angle_minus,rate_t_minus,rate_tau_minus";
  bool has0 = s.M_zero_minus.cols() > 0;
  if (has0) os << ",rate_t_zero_minus";
  os << "\n" << format_double(z) << "," << s.M_s.cols() << ","
     << format_double(principal_angle(s.M_minus, toy_track_subspaces(m, 0.0).M_minus)) << ","
     << format_double(dm.rate_t) << "," << format_double(dm.rate_tau);
  if (has0) os << "," << format_double(toy_decay_check(m, z, s.M_zero_minus.col(0)).rate_t);
  os << "\n";
  emit(c, os.str());
  return 0;
}

unsigned thread_cap() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* e = std::getenv("SMANIFOLD_THREADS")) {
    int v = std::atoi(e);
    if (v >= 1) n = std::min(n, static_cast<unsigned>(v));
  }
  return n;
}

int cmd_sweep(const Config& c) {
  std::vector<Axis> axes;
  for (const auto& s : c.params) axes.push_back(parse_axis(s));
  if (axes.empty() || axes.size() > 2) throw UsageError("sweep takes one or two --param axes");
  const bool toy = c.system == "toy" && axes.size() == 1 && axes[0].name == "zeta";
  SingularSystem sys;
  Vec base;
  std::vector<int> slots;
  if (!toy) {
    sys = load(c);
    base = initial_state(c, sys);
    for (const auto& a : axes) {
      if (a.name.size() < 2 || a.name[0] != 'u') throw UsageError("sweep parameters are u1..uN (or zeta for toy)");
      int k = std::atoi(a.name.c_str() + 1);
      if (k < 1 || k > sys.dim) throw UsageError("no coordinate " + a.name);
      slots.push_back(k - 1);
    }
  }
  size_t total = 1;
  for (const auto& a : axes) total *= a.values.size();
  std::vector<std::string> rows(total);
  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  IntegrateOptions io = integrate_options(c);
  double t_end = c.t_end.value_or(5.0);

  auto run = [&](size_t idx) {
    std::vector<double> pv;
    size_t rem = idx;
    for (size_t k = axes.size(); k-- > 0;) {
      pv.insert(pv.begin(), axes[k].values[rem % axes[k].values.size()]);
      rem /= axes[k].values.size();
    }
    std::ostringstream os;
    os << idx;
    for (double v : pv) os << "," << format_double(v);
    if (toy) {
      ToyLinearModel m = default_toy_model();
      ToySubspaces s = toy_track_subspaces(m, pv[0]);
      ToyDecay dm = toy_decay_check(m, pv[0], s.M_minus.col(0));
      double r0 = s.M_zero_minus.cols() ? toy_decay_check(m, pv[0], s.M_zero_minus.col(0)).rate_t : NAN;
      os << ",ok,,,," << format_double(dm.rate_t) << "," << format_double(r0);
    } else {
      Vec u = base;
      for (size_t k = 0; k < pv.size(); ++k) u[slots[k]] = pv[k];
      Trajectory tr = integrate_t(sys, u, t_end, io);
      const Event* z = tr.find_event("zeta_zero");
      const Event* b = tr.find_event("derivative_blowup");
      os << ",ok," << (z ? format_double(z->time) : "") << "," << (b ? format_double(b->time) : "") << ","
         << format_double(tr.back_time()) << ",,";
    }
    return os.str();
  };

  auto worker = [&]() {
    for (size_t i; (i = next.fetch_add(1)) < total;) {
      try {
        rows[i] = run(i);
      } catch (const std::exception& e) {
        std::ostringstream os;
        os << i << std::string(axes.size(), ',') << ",error,,,,,";
        rows[i] = os.str();
        if (!failed.exchange(true)) first_error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  unsigned nt = std::min<size_t>(thread_cap(), std::max<size_t>(total, 1));
  for (unsigned t = 0; t < nt; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::ostringstream out;
  out << "index";
  for (const auto& a : axes) out << "," << a.name;
  out << ",status,zeta_zero_t,derivative_blowup_t,final_t,rate_t_minus,rate_t_zero_minus\n";
  for (const auto& r : rows) out << r << "\n";
  emit(c, out.str());
  info(c) << "runs " << total << "\n";
  if (failed) {
    std::cerr << "error: " << first_error << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Singular ODE analysis: hypothesis checks, integration, manifolds and decompositions"};
  app.require_subcommand(1);
  Config cfg;
  auto common = [&](CLI::App* s) {
    s->add_option("--system", cfg.system, "builtin name or system JSON path");
    s->add_option("--u0", cfg.u0, "initial state, comma separated");
    s->add_option("--t-end", cfg.t_end, "end of the t interval");
    s->add_option("--tau-end", cfg.tau_end, "end of the tau interval");
    s->add_option("--param", cfg.params, "name=value, name=a,b,c or name=start:stop:count[:log]");
    s->add_option("--rtol", cfg.rtol, "relative tolerance");
    s->add_option("--atol", cfg.atol, "absolute tolerance");
    s->add_option("--delta", cfg.delta, "ball radius / cutoff delta");
    s->add_option("--out", cfg.out, "output file (stdout if absent)");
    s->add_option("--format", cfg.format, "csv or json");
    s->add_option("--seed", cfg.seed, "random seed");
  };
  std::vector<std::pair<std::string, int (*)(const Config&)>> cmds = {
      {"check", cmd_check},   {"integrate", cmd_integrate}, {"manifold", cmd_manifold},
      {"decompose", cmd_decompose}, {"toy", cmd_toy},         {"sweep", cmd_sweep}};
  const char* help[] = {"run hypothesis checks", "integrate in t or tau", "sample the uniformly stable manifold",
                        "decompose an orbit", "toy linear model spaces and rates", "parameter sweep"};
  std::vector<CLI::App*> subs;
  for (size_t i = 0; i < cmds.size(); ++i) {
    subs.push_back(app.add_subcommand(cmds[i].first, help[i]));
    common(subs.back());
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  try {
    for (size_t i = 0; i < cmds.size(); ++i)
      if (subs[i]->parsed()) return cmds[i].second(cfg);
  } catch (const HypothesisViolation& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return 2;
  } catch (const FactorizationResidual& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return 2;
  } catch (const NotContraction& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
