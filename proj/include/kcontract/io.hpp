#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "kcontract/lurie.hpp"
#include "kcontract/network.hpp"
#include "kcontract/sim.hpp"

namespace kcontract {

class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

using SystemVariant = std::variant<LurieSystem, NetworkedSystem>;

nlohmann::json matrix_to_json(const Eigen::MatrixXd& M);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& name);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& name);

/// System description document: kind in {lurie, network}, matrices as nested
/// row arrays, nonlinearity as {kind, parameters}, optional domain box.
SystemVariant system_from_json(const nlohmann::json& j);
nlohmann::json system_to_json(const SystemVariant& sys);
SystemVariant read_system_file(const std::string& path);

/// A bare matrix file: either a nested row array or {"matrix": [[...]]}.
Eigen::MatrixXd read_matrix_file(const std::string& path);

nlohmann::json certificate_to_json(const Certificate& cert);
std::string certificate_to_text(const Certificate& cert);

/// Rows "t,x1,...,xn,traj_id", 17 significant digits.
void write_trajectories_csv(std::ostream& os, const std::vector<Trajectory>& trajs);

std::string format_double(double x);

}  // namespace kcontract
