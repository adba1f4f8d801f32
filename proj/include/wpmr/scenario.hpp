#pragma once

// Network scenario: geometry, log-distance path loss, noise normalization,
// channel statistics, and the energy-harvester model.  A scenario is immutable
// after construction; random draws go through a caller-owned Rng so a sweep
// can run one independent stream per point.
//
// All powers handed to the optimization layers are dimensionless, divided by
// the receiver noise power noise_watts().  Channel variances carry only the
// linear-scale path-loss attenuation; the noise division lives entirely in
// p_o().

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "wpmr/common.hpp"
#include "wpmr/linalg.hpp"

namespace wpmr {

enum class EhModel { linear, nonlinear };

struct NetworkScenario {
    int k = 3;                                 // transmit antennas at the source
    int n_relays = 3;
    int m_cues = 1;                            // coexisting users with interference limits
    std::vector<double> d_f{2.0, 3.0, 4.0};    // source -> relay distance, per relay (m)
    std::vector<double> d_g{2.0, 2.0, 2.0};    // relay -> destination distance, per relay (m)
    std::vector<std::vector<double>> d_z{{3.0, 3.0, 3.0}};  // [cue][relay] (m)
    double alpha = 2.0;                        // path-loss exponent
    double l0_db = 25.0;                       // path loss at the 1 m reference distance
    double noise_density_dbm_hz = -90.0;
    double bandwidth_hz = 1e5;
    double eta = 0.5;                          // energy conversion efficiency
    double p_o_mw = 50.0;                      // source transmit power before normalization
    double zeta = 0.3;                         // interference violation probability limit
    double phi_bar = 1.0;                      // interference threshold per user, normalized
    double u_scale = 1.0;                      // scales the cross-channel second moment
    EhModel eh_model = EhModel::linear;
    std::vector<double> eh_nu, eh_a, eh_b;     // per relay; empty -> derived defaults
    double epsilon = 1e-5;                     // outer optimization tolerance
    std::uint64_t seed = 1;

    void validate() const {
        if (k < 1) throw error("scenario: k must be >= 1");
        if (n_relays < 1) throw error("scenario: n_relays must be >= 1");
        if (m_cues < 0) throw error("scenario: m_cues must be >= 0");
        auto check_dist = [](const std::vector<double>& d, int want, const char* name) {
            if (static_cast<int>(d.size()) != want)
                throw error(std::string("scenario: ") + name + " needs one entry per relay");
            for (double v : d)
                if (!(v > 0.0)) throw error(std::string("scenario: ") + name + " entries must be > 0");
        };
        check_dist(d_f, n_relays, "d_f");
        check_dist(d_g, n_relays, "d_g");
        if (static_cast<int>(d_z.size()) != m_cues)
            throw error("scenario: d_z needs one row per cue");
        for (const auto& row : d_z) check_dist(row, n_relays, "d_z");
        if (!(alpha > 0.0)) throw error("scenario: alpha must be > 0");
        if (!(bandwidth_hz > 0.0)) throw error("scenario: bandwidth_hz must be > 0");
        if (!(eta > 0.0 && eta <= 1.0)) throw error("scenario: eta must be in (0, 1]");
        if (!(p_o_mw > 0.0)) throw error("scenario: p_o_mw must be > 0");
        if (!(zeta > 0.0 && zeta <= 1.0)) throw error("scenario: zeta must be in (0, 1]");
        if (!(phi_bar > 0.0)) throw error("scenario: phi_bar must be > 0");
        if (u_scale < 0.0) throw error("scenario: u_scale must be >= 0");
        if (!(epsilon > 0.0)) throw error("scenario: epsilon must be > 0");
        auto check_eh = [&](const std::vector<double>& v, const char* name) {
            if (!v.empty() && static_cast<int>(v.size()) != n_relays)
                throw error(std::string("scenario: ") + name + " needs one entry per relay");
        };
        check_eh(eh_nu, "eh_nu");
        check_eh(eh_a, "eh_a");
        check_eh(eh_b, "eh_b");
    }

    // Noise power in watts from the density (dBm/Hz) and bandwidth.
    double noise_watts() const {
        return std::pow(10.0, (noise_density_dbm_hz - 30.0) / 10.0) * bandwidth_hz;
    }

    // Source transmit power divided by the noise power (dimensionless).
    double p_o() const { return p_o_mw * 1e-3 / noise_watts(); }

    double path_loss_db(double d) const {
        if (!(d > 0.0)) throw error("path_loss_db: distance must be > 0");
        return l0_db + 10.0 * alpha * std::log10(d);
    }

    // Linear-scale attenuation of a link at distance d; this is the variance
    // of each circularly-symmetric Gaussian channel entry on that link.
    double channel_var(double d) const { return std::pow(10.0, -path_loss_db(d) / 10.0); }
};

// One block-fading draw.  Cross channels z_m to the coexisting users are not
// sampled; only their first and second moments enter the optimization, and
// those moments are analytic in the scenario.
struct ChannelRealization {
    std::vector<CVec> f;      // per relay, length k: source -> relay
    CVec g;                   // relay -> destination, length n_relays
    std::vector<CVec> u;      // per cue: mean of the cross channel z_m
    std::vector<CMat> s;      // per cue: second moment of z_m about the mean
    std::vector<CMat> sigma;  // per cue: lifted moment matrix, (n+1) x (n+1)
};

inline ChannelRealization draw_channels(const NetworkScenario& sc, Rng& rng) {
    sc.validate();
    const int n = sc.n_relays;
    ChannelRealization r;
    r.f.resize(n);
    for (int i = 0; i < n; ++i) {
        const double var = sc.channel_var(sc.d_f[i]);
        r.f[i].resize(sc.k);
        for (int a = 0; a < sc.k; ++a) r.f[i][a] = rng.cnormal(var);
    }
    r.g.resize(n);
    for (int i = 0; i < n; ++i) r.g[i] = rng.cnormal(sc.channel_var(sc.d_g[i]));
    r.u.resize(sc.m_cues);
    r.s.resize(sc.m_cues);
    r.sigma.resize(sc.m_cues);
    for (int m = 0; m < sc.m_cues; ++m) {
        r.u[m].assign(n, cxd(0.0, 0.0));
        r.s[m] = CMat(n);
        for (int i = 0; i < n; ++i)
            r.s[m](i, i) = sc.u_scale * sc.channel_var(sc.d_z[m][i]);
        CMat sig(n + 1);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j)
                sig(i, j) = r.s[m](i, j) + r.u[m][i] * std::conj(r.u[m][j]);
            sig(i, n) = r.u[m][i];
            sig(n, i) = std::conj(r.u[m][i]);
        }
        sig(n, n) = 1.0;
        r.sigma[m] = sig;
    }
    return r;
}

// Logistic harvester.  The offset omega = 1/(1+exp(a*b)) makes the harvested
// power exactly zero at zero input.
struct NonlinearEhModel {
    std::vector<double> nu;     // saturation level per relay
    std::vector<double> a;      // logistic slope
    std::vector<double> b;      // logistic center (receive power)
    std::vector<double> omega;  // zero-input offset, in (0, 1)
};

// Defaults when the scenario leaves the per-relay parameters empty: the
// saturation matches what the linear model harvests from the mean receive
// power at a 50 mW operating point, and the logistic is centered at half that
// receive power.  These constants are synthetic calibration choices.
inline NonlinearEhModel nonlinear_model(const NetworkScenario& sc) {
    sc.validate();
    NonlinearEhModel m;
    const double p50 = 0.05 / sc.noise_watts();
    for (int i = 0; i < sc.n_relays; ++i) {
        const double rx50 = p50 * sc.k * sc.channel_var(sc.d_f[i]);
        const double nu = sc.eh_nu.empty() ? sc.eta * rx50 : sc.eh_nu[i];
        const double a = sc.eh_a.empty() ? 0.1 : sc.eh_a[i];
        const double b = sc.eh_b.empty() ? rx50 / 2.0 : sc.eh_b[i];
        if (!(nu > 0.0)) throw error("nonlinear_model: nu must be > 0");
        if (!(a > 0.0)) throw error("nonlinear_model: a must be > 0");
        if (b < 0.0) throw error("nonlinear_model: b must be >= 0");
        m.nu.push_back(nu);
        m.a.push_back(a);
        m.b.push_back(b);
        m.omega.push_back(1.0 / (1.0 + std::exp(a * b)));
    }
    return m;
}

inline double nonlinear_eh(double receive_power, const NonlinearEhModel& m, int n) {
    if (n < 0 || n >= static_cast<int>(m.nu.size())) throw error("nonlinear_eh: bad relay index");
    if (receive_power < 0.0) throw error("nonlinear_eh: receive power must be >= 0");
    // same sigmoid expression as the omega construction so that the zero-input
    // value cancels exactly
    const double sig = 1.0 / (1.0 + std::exp(-m.a[n] * (receive_power - m.b[n])));
    return m.nu[n] * (sig - m.omega[n]) / (1.0 - m.omega[n]);
}

// --- scenario file -----------------------------------------------------------
//
// One `key = value` per line; `#` starts a comment; blank lines are skipped.
// Vector values are comma-separated; d_z takes one comma-separated row per
// cue with rows separated by `;`.  Every scenario field has a key of the same
// name (k, n_relays, m_cues, d_f, d_g, d_z, alpha, l0_db,
// noise_density_dbm_hz, bandwidth_hz, eta, p_o_mw, zeta, phi_bar, u_scale,
// eh_model, eh_nu, eh_a, eh_b, epsilon, seed).  Unknown or duplicate keys are
// errors.

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double parse_real(const std::string& tok, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size() || !std::isfinite(v))
            throw error(where + ": bad number '" + tok + "'");
        return v;
    } catch (const error&) {
        throw;
    } catch (const std::exception&) {
        throw error(where + ": bad number '" + tok + "'");
    }
}

inline long long parse_integer(const std::string& tok, const std::string& where) {
    const double v = parse_real(tok, where);
    const long long i = static_cast<long long>(v);
    if (static_cast<double>(i) != v) throw error(where + ": expected an integer, got '" + tok + "'");
    return i;
}

inline std::vector<double> parse_real_list(const std::string& tok, const std::string& where) {
    std::vector<double> out;
    for (const auto& piece : split(tok, ','))
        out.push_back(parse_real(piece, where));
    return out;
}

}  // namespace detail

inline NetworkScenario parse_scenario_text(const std::string& text,
                                           const std::string& name = "scenario") {
    NetworkScenario sc;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = name + ":" + std::to_string(lineno);
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw error(where + ": expected `key = value`");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw error(where + ": empty key");
        if (val.empty()) throw error(where + ": empty value for '" + key + "'");
        if (!seen.insert(key).second) throw error(where + ": duplicate key '" + key + "'");

        if (key == "k") sc.k = static_cast<int>(detail::parse_integer(val, where));
        else if (key == "n_relays") sc.n_relays = static_cast<int>(detail::parse_integer(val, where));
        else if (key == "m_cues") sc.m_cues = static_cast<int>(detail::parse_integer(val, where));
        else if (key == "d_f") sc.d_f = detail::parse_real_list(val, where);
        else if (key == "d_g") sc.d_g = detail::parse_real_list(val, where);
        else if (key == "d_z") {
            sc.d_z.clear();
            for (const auto& row : detail::split(val, ';'))
                sc.d_z.push_back(detail::parse_real_list(row, where));
        } else if (key == "alpha") sc.alpha = detail::parse_real(val, where);
        else if (key == "l0_db") sc.l0_db = detail::parse_real(val, where);
        else if (key == "noise_density_dbm_hz") sc.noise_density_dbm_hz = detail::parse_real(val, where);
        else if (key == "bandwidth_hz") sc.bandwidth_hz = detail::parse_real(val, where);
        else if (key == "eta") sc.eta = detail::parse_real(val, where);
        else if (key == "p_o_mw") sc.p_o_mw = detail::parse_real(val, where);
        else if (key == "zeta") sc.zeta = detail::parse_real(val, where);
        else if (key == "phi_bar") sc.phi_bar = detail::parse_real(val, where);
        else if (key == "u_scale") sc.u_scale = detail::parse_real(val, where);
        else if (key == "eh_model") {
            if (val == "linear") sc.eh_model = EhModel::linear;
            else if (val == "nonlinear") sc.eh_model = EhModel::nonlinear;
            else throw error(where + ": eh_model must be 'linear' or 'nonlinear'");
        } else if (key == "eh_nu") sc.eh_nu = detail::parse_real_list(val, where);
        else if (key == "eh_a") sc.eh_a = detail::parse_real_list(val, where);
        else if (key == "eh_b") sc.eh_b = detail::parse_real_list(val, where);
        else if (key == "epsilon") sc.epsilon = detail::parse_real(val, where);
        else if (key == "seed") {
            const long long v = detail::parse_integer(val, where);
            if (v < 0) throw error(where + ": seed must be >= 0");
            sc.seed = static_cast<std::uint64_t>(v);
        } else throw error(where + ": unknown key '" + key + "'");
    }
    try {
        sc.validate();
    } catch (const error& e) {
        throw error(name + ": " + e.what());
    }
    return sc;
}

inline NetworkScenario parse_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw error("cannot open scenario file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario_text(buf.str(), path);
}

}  // namespace wpmr
