#include "grbsde/envelope.hpp"

#include <cmath>
#include <sstream>

namespace grbsde {

std::string ProcessSpec::name() const {
    switch (kind) {
        case Kind::constant: return "constant";
        case Kind::ramp: return "ramp";
        case Kind::abs_brownian: return "abs_brownian";
        case Kind::running_max_abs: return "running_max_abs";
    }
    return "?";
}

Panel ProcessSpec::materialize(const TimeMesh& mesh, const PathEnsemble& ensemble) const {
    const auto rows = static_cast<Eigen::Index>(ensemble.n_paths);
    const auto cols = static_cast<Eigen::Index>(mesh.n_nodes());
    Panel out(rows, cols);
    switch (kind) {
        case Kind::constant: out.setConstant(level); break;
        case Kind::ramp:
            for (Eigen::Index i = 0; i < cols; ++i) {
                out.col(i).setConstant(level + slope * mesh.time(static_cast<std::size_t>(i)));
            }
            break;
        case Kind::abs_brownian:
            out = (level + slope * ensemble.B[0].array().abs()).matrix();
            break;
        case Kind::running_max_abs: {
            Eigen::VectorXd running = ensemble.B[0].col(0).cwiseAbs();
            for (Eigen::Index i = 0; i < cols; ++i) {
                running = running.cwiseMax(ensemble.B[0].col(i).cwiseAbs());
                out.col(i) = (level + slope * running.array()).matrix();
            }
            break;
        }
    }
    return out;
}

void EnvelopeSpec::validate() const {
    if (!alpha.nonnegative() || !beta.nonnegative()) {
        throw ConfigError("envelope: alpha and beta must be nonnegative processes");
    }
    if (!R.nonnegative()) throw ConfigError("envelope: R must be nonnegative");
    if (!C.nondecreasing()) throw ConfigError("envelope: C must be nonnegative and nondecreasing");
}

Panel EnvelopeSpec::eta_path(const TimeMesh& mesh, const PathEnsemble& ensemble) const {
    validate();
    const Panel a = alpha.materialize(mesh, ensemble);
    const Panel b = beta.materialize(mesh, ensemble);
    Panel eta = Panel::Zero(a.rows(), a.cols());
    for (Eigen::Index i = 0; i + 1 < eta.cols(); ++i) {
        eta.col(i + 1) = eta.col(i) + a.col(i) * mesh.dt(static_cast<std::size_t>(i)) +
                         b.col(i).cwiseProduct(ensemble.dA.col(i));
    }
    return eta;
}

double envelope_identity_residual(const Transform& tf, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& eta) {
    if (x.size() != eta.size() || x.size() < 1) throw ConfigError("identity residual: size mismatch");
    const Eigen::Index n = x.size() - 1;
    double tail = 0.0;
    double worst = 0.0;
    for (Eigen::Index i = n - 1; i >= 0; --i) {
        tail += tf.phi()(x(i)) * (eta(i + 1) - eta(i));
        worst = std::max(worst, std::abs(x(i) - x(n) - tail));
    }
    return worst;
}

// ---------------------------------------------------------------- unbounded families

std::string UnboundedFamily::name() const {
    switch (kind) {
        case Kind::linear_psi1: return "linear_psi1";
        case Kind::xlogx_psi1: return "xlogx_psi1";
        case Kind::linear_psix: return "linear_psix";
    }
    return "?";
}

UnboundedFamily UnboundedFamily::from_name(const std::string& name, double D, double m) {
    if (name == "linear_psi1") return {Kind::linear_psi1, D, m};
    if (name == "xlogx_psi1") return {Kind::xlogx_psi1, D, m};
    if (name == "linear_psix") return {Kind::linear_psix, D, m};
    throw ConfigError("unknown unbounded envelope family '" + name + "'");
}

Transform UnboundedFamily::transform() const {
    switch (kind) {
        case Kind::linear_psi1: return Transform(D, Phi::linear(), Psi::one());
        case Kind::xlogx_psi1: return Transform(D, Phi::r_log_r(), Psi::one());
        case Kind::linear_psix: return Transform(D, Phi::linear(), Psi::identity());
    }
    return Transform(D, Phi::linear(), Psi::one());
}

Panel unbounded_envelope(const UnboundedFamily& family, const Panel& conditional_lambda_bar,
                         const Panel& C, const Panel& eta) {
    const Panel& lam = conditional_lambda_bar;
    if (lam.rows() != eta.rows() || lam.cols() != eta.cols()) {
        throw ConfigError("unbounded envelope: lambda_bar and eta panels differ in shape");
    }
    const bool uses_c = family.kind == UnboundedFamily::Kind::linear_psi1;
    if (uses_c && (C.rows() != lam.rows() || C.cols() != lam.cols())) {
        throw ConfigError("unbounded envelope: C panel differs in shape");
    }
    if (family.kind == UnboundedFamily::Kind::xlogx_psi1 && !(family.D > 1.0)) {
        throw ConfigError("xlogx_psi1 envelope needs D > 1");
    }
    if (!uses_c && !(family.m > 0.0)) throw ConfigError("envelope family needs m > 0");

    // F_0 for the psi = x family; D = 0 is fine here since only F is used.
    const Transform f0(family.D, Phi::linear(), Psi::identity());
    const double D = family.D;
    const double m = family.m;

    Panel out(lam.rows(), lam.cols());
    for (Eigen::Index j = 0; j < lam.cols(); ++j) {
        for (Eigen::Index p = 0; p < lam.rows(); ++p) {
            const double l = lam(p, j);
            const double e = eta(p, j);
            if (!(l >= 0.0)) {
                throw AdmissibilityError("unbounded envelope: conditional lambda_bar is negative", l,
                                         static_cast<std::size_t>(j), static_cast<std::size_t>(p));
            }
            double u = 0.0;
            double deficit = 0.0;
            switch (family.kind) {
                case UnboundedFamily::Kind::linear_psi1: {
                    const double c = C(p, j);
                    u = c < c_zero_threshold ? D + l : D + std::log1p(c * l) / c;
                    deficit = std::log(u / D) - e;
                    break;
                }
                case UnboundedFamily::Kind::xlogx_psi1:
                    u = D + std::log1p(m * l) / m;
                    deficit = std::log(std::log(u)) - std::log(std::log(D)) - e;
                    break;
                case UnboundedFamily::Kind::linear_psix:
                    u = eval_F_inv(l, m, f0);
                    deficit = D > 0.0 ? std::log(u / D) - e : 0.0;
                    break;
            }
            if (deficit < -admissibility_tolerance) {
                std::ostringstream msg;
                msg << "unbounded envelope: node " << j << ", path " << p
                    << " outside the admissible set (deficit " << deficit << ")";
                throw AdmissibilityError(msg.str(), deficit, static_cast<std::size_t>(j),
                                         static_cast<std::size_t>(p));
            }
            if (deficit < 0.0) {
                out(p, j) = D;
                continue;
            }
            switch (family.kind) {
                case UnboundedFamily::Kind::xlogx_psi1:
                    out(p, j) = std::exp(std::exp(-e) * std::log(u));
                    break;
                default: out(p, j) = std::exp(-e) * u; break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------- (x, z, k) construction

EnvelopePath build_transformed_solution(const Panel& x1, const VectorPanel& z1, const Panel& C,
                                        const Panel& eta, const Transform& tf, const TimeMesh& mesh,
                                        double dk_tolerance) {
    const Eigen::Index rows = x1.rows();
    const Eigen::Index nodes = x1.cols();
    if (nodes != static_cast<Eigen::Index>(mesh.n_nodes()) || C.rows() != rows || C.cols() != nodes ||
        eta.rows() != rows || eta.cols() != nodes) {
        throw ConfigError("transformed solution: panel shapes disagree with the mesh");
    }
    for (const Panel& zk : z1) {
        if (zk.rows() != rows || zk.cols() != nodes) throw ConfigError("transformed solution: z1 shape");
    }

    EnvelopePath out;
    out.values.resize(rows, nodes);
    out.M.resize(rows, nodes);
    out.z_values = zero_vector_panel(z1.size(), rows, nodes);
    out.k_increments = Panel::Zero(rows, nodes - 1);

    const Phi& phi = tf.phi();
    // Per-node factors reused by the dk increment.
    Panel gx(rows, nodes);
    Panel quad_coef(rows, nodes);
    Panel gc(rows, nodes);
    for (Eigen::Index j = 0; j < nodes; ++j) {
        for (Eigen::Index p = 0; p < rows; ++p) {
            const TransformPoint pt{x1(p, j), C(p, j), eta(p, j)};
            double g = 0.0;
            try {
                g = eval_G(pt, tf);
            } catch (const AdmissibilityError& e) {
                std::ostringstream msg;
                msg << "transformed solution: node " << j << ", path " << p << ": " << e.what();
                throw AdmissibilityError(msg.str(), e.deficit(), static_cast<std::size_t>(j),
                                         static_cast<std::size_t>(p));
            }
            const double u = eval_F_inv(pt.x, pt.c, tf);
            const double decay = std::exp(-pt.c * tf.psi_integral(u));
            const double phi_u = phi(u);
            const double phi_g = phi(g);
            out.values(p, j) = g;
            gx(p, j) = phi_g * decay / phi_u;
            quad_coef(p, j) = 0.5 * phi_g * decay * decay / (phi_u * phi_u);
            out.M(p, j) = tf.varphi(u, pt.c) - tf.varphi(g, pt.c);
            gc(p, j) = -gx(p, j) * dF_dc(u, pt.c, tf);
        }
    }
    for (std::size_t k = 0; k < z1.size(); ++k) out.z_values[k] = gx.cwiseProduct(z1[k]);

    for (Eigen::Index i = 0; i + 1 < nodes; ++i) {
        const double dt = mesh.dt(static_cast<std::size_t>(i));
        Eigen::VectorXd z2 = Eigen::VectorXd::Zero(rows);
        for (const Panel& zk : z1) z2 += zk.col(i).cwiseAbs2();
        out.k_increments.col(i) =
            -gc.col(i).cwiseProduct(C.col(i + 1) - C.col(i)) +
            (quad_coef.col(i).array() * z2.array() * out.M.col(i).array() * dt).matrix();
    }
    out.min_dk = out.k_increments.size() > 0 ? out.k_increments.minCoeff() : 0.0;
    out.dk_nonnegative = out.min_dk >= -dk_tolerance;
    return out;
}

}  // namespace grbsde
