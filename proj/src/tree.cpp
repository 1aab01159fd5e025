#include "grbsde/tree.hpp"

#include <cmath>
#include <numbers>

#include "grbsde/errors.hpp"

namespace grbsde {

BinomialTree::BinomialTree(double T, std::size_t n_steps) : T_(T), n_(n_steps) {
    if (!(T > 0.0)) throw ConfigError("tree horizon must be positive");
    if (n_steps < 1) throw ConfigError("tree needs at least one step");
    dt_ = T / static_cast<double>(n_steps);
}

double BinomialTree::reach_probability(std::size_t level, std::size_t j) const {
    const double l = static_cast<double>(level);
    const double k = static_cast<double>(j);
    return std::exp(std::lgamma(l + 1.0) - std::lgamma(k + 1.0) - std::lgamma(l - k + 1.0) -
                    l * std::numbers::ln2);
}

BinomialTree binomial_tree(double T, std::size_t n_steps, std::size_t d) {
    if (d != 1) throw ConfigError("binomial tree supports d = 1 only");
    return BinomialTree(T, n_steps);
}

}  // namespace grbsde
