#include "ctxcausal/prob_table.hpp"

#include <cstdlib>
#include <stdexcept>

namespace ctxcausal {

JointTable::JointTable(std::vector<TableVariable> variables) : vars_(std::move(variables)) {
    std::size_t total = 1;
    for (auto& v : vars_) {
        if (v.levels.empty()) throw std::runtime_error("table variable without levels: " + v.name);
        if (v.values.empty()) {
            for (std::size_t i = 0; i < v.levels.size(); ++i) {
                char* end = nullptr;
                const double parsed = std::strtod(v.levels[i].c_str(), &end);
                v.values.push_back(end && *end == '\0' ? parsed : static_cast<double>(i));
            }
        }
        if (v.values.size() != v.levels.size()) {
            throw std::runtime_error("level/value size mismatch for " + v.name);
        }
        if (total > 1000000u / v.levels.size() + 1) {
            throw std::runtime_error("joint table state space exceeds 1e6 configurations");
        }
        total *= v.levels.size();
    }
    if (total > 1000000u) {
        throw std::runtime_error("joint table state space exceeds 1e6 configurations");
    }
    strides_.assign(vars_.size(), 1);
    for (int i = static_cast<int>(vars_.size()) - 2; i >= 0; --i) {
        strides_[i] = strides_[i + 1] * vars_[i + 1].levels.size();
    }
    probs_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));
}

int JointTable::var_index(const std::string& name) const {
    for (std::size_t i = 0; i < vars_.size(); ++i) {
        if (vars_[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

int JointTable::require_var(const std::string& name) const {
    const int i = var_index(name);
    if (i < 0) throw std::runtime_error("table does not contain variable " + name);
    return i;
}

int JointTable::level_index(const std::string& var, const std::string& level) const {
    const auto& v = vars_[require_var(var)];
    for (std::size_t i = 0; i < v.levels.size(); ++i) {
        if (v.levels[i] == level) return static_cast<int>(i);
    }
    throw std::runtime_error("variable " + var + " has no level " + level);
}

std::size_t JointTable::flat_index(const std::vector<int>& config) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < vars_.size(); ++i) idx += strides_[i] * config[i];
    return idx;
}

std::vector<int> JointTable::config_of(std::size_t flat) const {
    std::vector<int> config(vars_.size());
    for (std::size_t i = 0; i < vars_.size(); ++i) {
        config[i] = static_cast<int>(flat / strides_[i]);
        flat %= strides_[i];
    }
    return config;
}

double JointTable::marginal(const std::map<int, int>& assignment) const {
    double total = 0.0;
    for (std::size_t flat = 0; flat < size(); ++flat) {
        bool match = true;
        for (const auto& [var, level] : assignment) {
            if (static_cast<int>(flat / strides_[var] % vars_[var].levels.size()) != level) {
                match = false;
                break;
            }
        }
        if (match) total += probs_[static_cast<Eigen::Index>(flat)];
    }
    return total;
}

void JointTable::normalize() {
    const double t = total();
    if (t <= 0.0) throw std::runtime_error("cannot normalize an all-zero table");
    probs_ /= t;
}

}  // namespace ctxcausal
