#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace ctxcausal {

struct TableVariable {
    std::string name;
    std::vector<std::string> levels;
    std::vector<double> values;  // numeric value per level; defaults to parsed
                                 // level name or the level index
};

// Exact joint distribution over a small set of discrete variables. Probabilities
// are stored row-major over the mixed-radix configuration space.
class JointTable {
public:
    JointTable() = default;
    explicit JointTable(std::vector<TableVariable> variables);

    const std::vector<TableVariable>& variables() const { return vars_; }
    int var_index(const std::string& name) const;  // -1 when absent
    int require_var(const std::string& name) const;
    int level_index(const std::string& var, const std::string& level) const;

    std::size_t size() const { return probs_.size(); }
    Eigen::VectorXd& probs() { return probs_; }
    const Eigen::VectorXd& probs() const { return probs_; }

    std::size_t flat_index(const std::vector<int>& config) const;
    std::vector<int> config_of(std::size_t flat) const;

    double& at(const std::vector<int>& config) { return probs_[flat_index(config)]; }
    double at(const std::vector<int>& config) const { return probs_[flat_index(config)]; }

    // Probability of a partial assignment (var index -> level index).
    double marginal(const std::map<int, int>& assignment) const;

    double total() const { return probs_.sum(); }
    void normalize();

private:
    std::vector<TableVariable> vars_;
    std::vector<std::size_t> strides_;
    Eigen::VectorXd probs_;
};

}  // namespace ctxcausal
