#include "smanifold/system_io.hpp"

#include <json.hpp>

#include <fstream>
#include <memory>
#include <sstream>

namespace smanifold {

namespace {

struct CompiledField {
  std::vector<Expr> comps;

  Vec eval(const Vec& u) const {
    Vec out(static_cast<Eigen::Index>(comps.size()));
    for (size_t i = 0; i < comps.size(); ++i) out[static_cast<Eigen::Index>(i)] = comps[i].eval(u.data());
    return out;
  }
  Mat jac(const Vec& u) const {
    Mat J(static_cast<Eigen::Index>(comps.size()), u.size());
    Vec g(u.size());
    for (size_t i = 0; i < comps.size(); ++i) {
      comps[i].eval_grad(u.data(), g.data());
      J.row(static_cast<Eigen::Index>(i)) = g.transpose();
    }
    return J;
  }
};

std::shared_ptr<CompiledField> compile_field(const std::vector<std::string>& src, int dim, const char* what) {
  if (static_cast<int>(src.size()) != dim)
    throw DimensionMismatch(std::string(what) + " has " + std::to_string(src.size()) + " components, expected " +
                            std::to_string(dim));
  auto f = std::make_shared<CompiledField>();
  for (const auto& s : src) f->comps.push_back(Expr::parse(s, dim));
  return f;
}

}  // namespace

SingularSystem system_from_source(const SystemSource& src, int dim, const std::string& name,
                                  std::optional<double> delta) {
  if (dim <= 0) throw DimensionMismatch("dimension must be positive");
  auto z = std::make_shared<Expr>(Expr::parse(src.zeta, dim));
  auto ps = compile_field(src.phi_s, dim, "phi_s");
  auto pn = compile_field(src.phi_ns, dim, "phi_ns");
  SingularSystem sys;
  sys.dim = dim;
  sys.name = name;
  for (int i = 0; i < dim; ++i) sys.labels.push_back("u" + std::to_string(i + 1));
  sys.zeta = [z](const Vec& u) { return z->eval(u.data()); };
  sys.grad_zeta = [z](const Vec& u) {
    Vec g(u.size());
    z->eval_grad(u.data(), g.data());
    return g;
  };
  sys.phi_s = [ps](const Vec& u) { return ps->eval(u); };
  sys.phi_ns = [pn](const Vec& u) { return pn->eval(u); };
  sys.jac_phi_s = [ps](const Vec& u) { return ps->jac(u); };
  sys.jac_phi_ns = [pn](const Vec& u) { return pn->jac(u); };
  if (delta) {
    if (!(*delta > 0.0)) throw Error("delta must be positive");
    sys.cutoff_delta = delta;
  }
  sys.source = src;
  return sys;
}

SingularSystem parse_system_json(const std::string& text, const std::string& name) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(std::string("invalid system JSON: ") + e.what());
  }
  try {
    SystemSource src;
    int dim = j.at("dim").get<int>();
    src.zeta = j.at("zeta").get<std::string>();
    src.phi_s = j.at("phi_s").get<std::vector<std::string>>();
    src.phi_ns = j.at("phi_ns").get<std::vector<std::string>>();
    std::optional<double> delta;
    if (j.contains("delta") && !j["delta"].is_null()) delta = j["delta"].get<double>();
    std::string nm = j.contains("name") ? j["name"].get<std::string>() : name;
    SingularSystem sys = system_from_source(src, dim, nm, delta);
    if (j.contains("labels")) {
      auto labels = j["labels"].get<std::vector<std::string>>();
      if (static_cast<int>(labels.size()) == dim) sys.labels = labels;
    }
    return sys;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed system definition: ") + e.what());
  }
}

SingularSystem load_system_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open system file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_system_json(ss.str(), path);
}

std::string export_system_json(const SingularSystem& sys) {
  if (!sys.source) throw Error("system '" + sys.name + "' has no expression source to export");
  nlohmann::ordered_json j;
  j["name"] = sys.name;
  j["dim"] = sys.dim;
  j["zeta"] = sys.source->zeta;
  j["phi_s"] = sys.source->phi_s;
  j["phi_ns"] = sys.source->phi_ns;
  if (sys.cutoff_delta) j["delta"] = *sys.cutoff_delta;
  j["labels"] = sys.labels;
  return j.dump(2) + "\n";
}

}  // namespace smanifold
