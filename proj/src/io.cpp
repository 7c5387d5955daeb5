#include "kcontract/io.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

namespace kcontract {

using nlohmann::json;

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

json matrix_to_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ParseError(name + ": expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ParseError(name + ": ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& cell = row[static_cast<std::size_t>(c)];
      if (!cell.is_number()) throw ParseError(name + ": non-numeric entry");
      M(i, c) = cell.get<double>();
    }
  }
  if (!M.allFinite()) throw ParseError(name + ": non-finite entry");
  return M;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& name) {
  if (!j.is_array()) throw ParseError(name + ": expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ParseError(name + ": non-numeric entry");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  if (!v.allFinite()) throw ParseError(name + ": non-finite entry");
  return v;
}

namespace {

Provenance provenance_from_string(const std::string& s) {
  if (s == "analytic") return Provenance::Analytic;
  if (s == "sampled") return Provenance::Sampled;
  throw ParseError("provenance must be 'analytic' or 'sampled'");
}

NonlinearityDescriptor phi_from_json(const json& j, Eigen::Index m, Eigen::Index q) {
  if (!j.is_object() || !j.contains("kind"))
    throw ParseError("phi: expected an object with a 'kind' field");
  const std::string kind = j.at("kind").get<std::string>();
  NonlinearityDescriptor phi;
  if (kind == "tanh-diagonal") {
    if (m != q) throw ParseError("phi tanh-diagonal: requires m == q");
    phi = NonlinearityDescriptor::tanh_diagonal(q);
  } else if (kind == "affine-tanh") {
    const Eigen::MatrixXd W1 = matrix_from_json(j.at("W1"), "phi.W1");
    const Eigen::MatrixXd W2 = matrix_from_json(j.at("W2"), "phi.W2");
    const Eigen::VectorXd v = j.contains("v")
                                  ? vector_from_json(j.at("v"), "phi.v")
                                  : Eigen::VectorXd::Zero(W1.rows()).eval();
    const double scale = j.value("scale", 1.0);
    phi = NonlinearityDescriptor::affine_tanh(W1, W2, v, scale);
  } else if (kind == "zero") {
    phi = NonlinearityDescriptor::zero(m, q);
  } else {
    throw ParseError("phi: unknown kind '" + kind + "'");
  }
  if (j.contains("gain_bound")) phi.gain_bound = j.at("gain_bound").get<double>();
  if (j.contains("provenance"))
    phi.gain_provenance = provenance_from_string(j.at("provenance").get<std::string>());
  return phi;
}

json phi_to_json(const NonlinearityDescriptor& phi, const json& stored_params) {
  json j = stored_params;
  if (phi.gain_bound) j["gain_bound"] = *phi.gain_bound;
  j["provenance"] = to_string(phi.gain_provenance);
  return j;
}

ActivationDescriptor activation_from_json(const json& j, Eigen::Index m, Eigen::Index q) {
  if (!j.is_object() || !j.contains("kind"))
    throw ParseError("f: expected an object with a 'kind' field");
  const std::string kind = j.at("kind").get<std::string>();
  ActivationDescriptor f;
  if (kind == "tanh-diagonal") {
    if (m != q) throw ParseError("f tanh-diagonal: requires m == q");
    f = ActivationDescriptor::tanh_diagonal(q);
  } else if (kind == "opinion-odd-saturating") {
    if (m != q) throw ParseError("f opinion-odd-saturating: requires m == q");
    f = ActivationDescriptor::opinion_odd_saturating(q);
  } else if (kind == "power-trig") {
    f = ActivationDescriptor::power_trig(j.value("phi_angle", 0.0));
  } else {
    throw ParseError("f: unknown kind '" + kind + "'");
  }
  if (j.contains("jac_norm_bound")) f.jac_norm_bound = j.at("jac_norm_bound").get<double>();
  if (j.contains("provenance"))
    f.bound_provenance = provenance_from_string(j.at("provenance").get<std::string>());
  if (j.contains("uniformly_bounded"))
    f.uniformly_bounded = j.at("uniformly_bounded").get<bool>();
  return f;
}

std::string activation_kind_string(ActivationDescriptor::Kind k) {
  switch (k) {
    case ActivationDescriptor::Kind::TanhDiagonal: return "tanh-diagonal";
    case ActivationDescriptor::Kind::OpinionOddSaturating: return "opinion-odd-saturating";
    case ActivationDescriptor::Kind::PowerTrig: return "power-trig";
    case ActivationDescriptor::Kind::User: return "user";
  }
  return "?";
}

}  // namespace

SystemVariant system_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind"))
    throw ParseError("system: expected an object with a 'kind' field");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "lurie") {
    LurieSystem sys;
    sys.A = matrix_from_json(j.at("A"), "A");
    sys.B = matrix_from_json(j.at("B"), "B");
    sys.C = matrix_from_json(j.at("C"), "C");
    sys.phi = phi_from_json(j.at("phi"), sys.B.cols(), sys.C.rows());
    try {
      sys.validate();
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what());
    }
    return sys;
  }
  if (kind == "network") {
    NetworkedSystem sys;
    sys.d = vector_from_json(j.at("D"), "D");
    sys.W1 = matrix_from_json(j.at("W1"), "W1");
    sys.W2 = matrix_from_json(j.at("W2"), "W2");
    sys.v = j.contains("v") ? vector_from_json(j.at("v"), "v")
                            : Eigen::VectorXd::Zero(sys.d.size()).eval();
    sys.f = activation_from_json(j.at("f"), sys.W1.cols(), sys.W2.rows());
    if (j.contains("omega")) {
      Box box;
      box.lo = vector_from_json(j.at("omega").at("lo"), "omega.lo");
      box.hi = vector_from_json(j.at("omega").at("hi"), "omega.hi");
      if (!box.valid()) throw ParseError("omega: lo/hi mismatch or empty box");
      sys.omega = box;
    }
    try {
      sys.validate();
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what());
    }
    return sys;
  }
  throw ParseError("system: unknown kind '" + kind + "'");
}

json system_to_json(const SystemVariant& sysv) {
  json j;
  if (std::holds_alternative<LurieSystem>(sysv)) {
    const auto& sys = std::get<LurieSystem>(sysv);
    j["kind"] = "lurie";
    j["A"] = matrix_to_json(sys.A);
    j["B"] = matrix_to_json(sys.B);
    j["C"] = matrix_to_json(sys.C);
    json params;
    switch (sys.phi.kind) {
      case NonlinearityDescriptor::Kind::TanhDiagonal:
        params["kind"] = "tanh-diagonal";
        break;
      case NonlinearityDescriptor::Kind::AffineTanh:
        params["kind"] = "affine-tanh";
        break;
      case NonlinearityDescriptor::Kind::UserSampled:
        params["kind"] = "user-sampled";
        break;
    }
    j["phi"] = phi_to_json(sys.phi, params);
  } else {
    const auto& sys = std::get<NetworkedSystem>(sysv);
    j["kind"] = "network";
    j["D"] = vector_to_json(sys.d);
    j["W1"] = matrix_to_json(sys.W1);
    j["W2"] = matrix_to_json(sys.W2);
    j["v"] = vector_to_json(sys.v);
    json f;
    f["kind"] = activation_kind_string(sys.f.kind);
    if (sys.f.kind == ActivationDescriptor::Kind::PowerTrig)
      f["phi_angle"] = sys.f.parameter;
    f["jac_norm_bound"] = sys.f.jac_norm_bound;
    f["provenance"] = to_string(sys.f.bound_provenance);
    f["uniformly_bounded"] = sys.f.uniformly_bounded;
    j["f"] = f;
    if (sys.omega) {
      j["omega"]["lo"] = vector_to_json(sys.omega->lo);
      j["omega"]["hi"] = vector_to_json(sys.omega->hi);
    }
  }
  return j;
}

SystemVariant read_system_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open system file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("invalid JSON in " + path + ": " + e.what());
  }
  return system_from_json(j);
}

Eigen::MatrixXd read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open matrix file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("invalid JSON in " + path + ": " + e.what());
  }
  if (j.is_object() && j.contains("matrix")) j = j.at("matrix");
  return matrix_from_json(j, path);
}

json certificate_to_json(const Certificate& cert) {
  json j;
  j["k"] = cert.k;
  j["status"] = to_string(cert.status);
  j["eta1"] = cert.eta1;
  j["eta2"] = cert.eta2;
  j["rate"] = cert.rate;
  j["margin"] = cert.margin;
  j["which_gain"] = to_string(cert.which_gain);
  j["gain_provenance"] = to_string(cert.gain_provenance);
  j["convergence_implied"] = cert.convergence_implied;
  if (cert.Q.size()) j["Q"] = matrix_to_json(cert.Q);
  if (cert.Qk.size()) j["Q_compound"] = matrix_to_json(cert.Qk);
  return j;
}

std::string certificate_to_text(const Certificate& cert) {
  std::string out;
  out += "status: " + to_string(cert.status) + "\n";
  out += "k: " + std::to_string(cert.k) + "\n";
  out += "eta1: " + format_double(cert.eta1) + "\n";
  out += "eta2: " + format_double(cert.eta2) + "\n";
  out += "rate: " + format_double(cert.rate) + "\n";
  out += "margin: " + format_double(cert.margin) + "\n";
  out += "which_gain: " + to_string(cert.which_gain) + "\n";
  out += "gain_provenance: " + to_string(cert.gain_provenance) + "\n";
  out += "convergence_implied: " + std::string(cert.convergence_implied ? "true" : "false") + "\n";
  if (cert.Q.size()) {
    out += "Q:\n";
    for (Eigen::Index i = 0; i < cert.Q.rows(); ++i) {
      out += " ";
      for (Eigen::Index j = 0; j < cert.Q.cols(); ++j)
        out += " " + format_double(cert.Q(i, j));
      out += "\n";
    }
  }
  return out;
}

void write_trajectories_csv(std::ostream& os, const std::vector<Trajectory>& trajs) {
  if (trajs.empty()) {
    os << "t,traj_id\n";
    return;
  }
  const auto n = trajs.front().states.front().size();
  os << "t";
  for (Eigen::Index i = 0; i < n; ++i) os << ",x" << (i + 1);
  os << ",traj_id\n";
  for (std::size_t id = 0; id < trajs.size(); ++id) {
    const auto& traj = trajs[id];
    for (std::size_t s = 0; s < traj.times.size(); ++s) {
      os << format_double(traj.times[s]);
      for (Eigen::Index i = 0; i < n; ++i) os << "," << format_double(traj.states[s][i]);
      os << "," << id << "\n";
    }
  }
}

}  // namespace kcontract
