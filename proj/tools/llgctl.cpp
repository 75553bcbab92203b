// llgctl: experiment driver. One JSON config per run; outputs land in --out
// together with manifest.json describing every file written.

#include "config.hpp"

#include "llg/evolution.hpp"
#include "llg/frenet_profiles.hpp"
#include "llg/io.hpp"
#include "llg/regimes.hpp"
#include "llg/rough_data.hpp"
#include "llg/solitons.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <map>
#include <optional>
#include <thread>

#ifndef LLG_VERSION
#define LLG_VERSION "dev"
#endif

namespace fs = std::filesystem;
using namespace llg;
using llg::io::json;
using llgctl::Block;
using llgctl::ConfigError;

namespace {

constexpr int exit_ok = 0, exit_config = 2, exit_numeric = 3;

struct ResourceCap : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Failure { None, Domain, Numeric };

struct RunRecord {
    std::string name;
    std::string status = "completed"; // completed | guard-aborted | failed
    std::string message;
    std::vector<std::string> files;
    json metrics = json::object();
    Failure failure = Failure::None;
    double seconds = 0.0;
};

struct Context {
    std::string command;
    fs::path out;
    std::uint64_t seed = 0;
    int threads = 1;
    long max_steps = 50'000'000;
    double wall_time = 0.0; // seconds; 0 = uncapped
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    json manifest = json::object();
    std::vector<RunRecord> runs;
    std::vector<std::string> loose_files; // outputs not tied to a single run

    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    void check_wall() const {
        if (wall_time > 0.0 && elapsed() > wall_time)
            throw ResourceCap("wall-time cap of " + io::fmt17(wall_time) + " s reached");
    }
    fs::path file(const std::string& name) const { return out / name; }
};

// Runs body(i) for i < n on up to `threads` workers; results go to caller-owned slots.
void parallel_for(int n, int threads, const std::function<void(int)>& body) {
    const int w = std::max(1, std::min(threads, n));
    if (w == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < w; ++t)
        pool.emplace_back([&]() {
            for (int i; (i = next++) < n;) body(i);
        });
    for (auto& th : pool) th.join();
}

// Wraps one run: timing, wall cap, exception classification.
void guarded(Context& ctx, RunRecord& rec, const std::function<void()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
        ctx.check_wall();
        f();
    } catch (const DomainError& e) {
        rec.status = "failed", rec.message = e.what(), rec.failure = Failure::Domain;
    } catch (const ResourceCap& e) {
        rec.status = "failed", rec.message = e.what(), rec.failure = Failure::Numeric;
    } catch (const std::exception& e) {
        rec.status = "failed", rec.message = e.what(), rec.failure = Failure::Numeric;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string short_num(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.6g", v);
    return b;
}

std::string tag(int i) {
    char b[16];
    std::snprintf(b, sizeof b, "%02d", i);
    return b;
}

json limits_json(const LimitData& ld, double x_reached, double extra_error) {
    json j;
    j["A_plus"] = io::to_json(ld.A_plus);
    j["A_minus"] = io::to_json(ld.A_minus);
    j["B_plus"] = io::to_json(ld.B_plus);
    j["B_minus"] = io::to_json(ld.B_minus);
    j["angle"] = io::number(ld.angle);
    j["phases"] = io::numbers({ld.phases.begin(), ld.phases.end()});
    j["amplitudes"] = io::numbers({ld.amplitudes.begin(), ld.amplitudes.end()});
    j["params"] = {{"kind", to_string(ld.kind)}, {"c", ld.params.c}, {"alpha", ld.params.alpha}};
    j["tolerances"] = {{"tol", ld.tol}, {"fit_residual", io::number(ld.fit_residual)}, {"x_reached", x_reached},
                       {"adiabatic_error", io::number(extra_error)}};
    return j;
}

// ---- profile ---------------------------------------------------------------

void cmd_profile(Context& ctx, Block& b) {
    const auto kind_s = b.str("kind", "expander", {"expander", "shrinker"});
    const double c = b.num("c", 0.8, 0.0, 50.0);
    const auto alphas = b.nums("alpha", {0.01, 0.2, 0.4}, 0.0, 1.0);
    const double x_max = b.num("x_max", 10.0, 1e-3, 1e4);
    const double tol = b.num("tol", 1e-10, 1e-14, 1e-3);
    const double h = b.num("h", 0.005, 1e-5, 1.0);
    b.finish();
    const auto kind = kind_s == "expander" ? ProfileKind::Expander : ProfileKind::Shrinker;
    ctx.manifest["figure"] = kind == ProfileKind::Expander ? "expander profiles m_{c,alpha} on the sphere, one panel per alpha"
                                                           : "shrinker profile f_{c,alpha} spiralling onto its limit circles";

    const int n = static_cast<int>(alphas.size());
    std::vector<ProfileSolution> sols(n);
    std::vector<LimitData> lims(n);
    std::vector<double> adiabatic(n, std::numeric_limits<double>::quiet_NaN());
    ctx.runs.resize(n);
    parallel_for(n, ctx.threads, [&](int i) {
        auto& rec = ctx.runs[i];
        rec.name = kind_s + "_alpha_" + short_num(alphas[i]);
        guarded(ctx, rec, [&]() {
            const ProfileParams p(c, alphas[i]);
            sols[i] = integrate_profile(kind, p, x_max, tol, h);
            if (kind == ProfileKind::Expander) {
                lims[i] = expander_limits(p, std::min(tol, 1e-12));
            } else if (c == 0.0) {
                lims[i].kind = kind, lims[i].params = p, lims[i].tol = tol;
            } else {
                auto run = shrinker_limit_circles(sols[i]);
                lims[i] = run.limits;
                adiabatic[i] = run.adiabatic_error;
            }
        });
    });

    std::vector<io::Panel> panels;
    for (int i = 0; i < n; ++i) {
        auto& rec = ctx.runs[i];
        if (rec.status == "failed") {
            if (!sols[i].x.empty()) rec.message += " (profile integrated to x = " + io::fmt17(sols[i].x_reached) + ")";
            continue;
        }
        const auto& s = sols[i];
        const std::string csv = "profile_" + tag(i) + ".csv", js = "limits_" + tag(i) + ".json";
        io::CsvWriter w(ctx.file(csv), {"x", "m1", "m2", "m3", "n1", "n2", "n3", "b1", "b2", "b3", "k", "tau"});
        std::vector<Vec3> curve;
        for (std::size_t j = 0; j < s.size(); ++j) {
            const auto& f = s.frames[j];
            auto [k, tau] = curvature_torsion(kind, s.params, s.x[j]);
            w.row({s.x[j], f.m[0], f.m[1], f.m[2], f.n[0], f.n[1], f.n[2], f.b[0], f.b[1], f.b[2], k, tau});
            curve.push_back(f.m);
        }
        io::write_json(ctx.file(js), limits_json(lims[i], s.x_reached, adiabatic[i]));
        rec.files = {csv, js};
        rec.metrics = {{"angle", io::number(lims[i].angle)},
                       {"capped", s.capped},
                       {"parity_defect", s.parity_defect},
                       {"steps_accepted", s.steps_accepted},
                       {"steps_rejected", s.steps_rejected},
                       {"x_reached", s.x_reached}};
        panels.push_back(io::sphere_panel(curve, "c = " + io::detail::g3(c) + ", alpha = " + io::detail::g3(alphas[i])));
    }
    if (!panels.empty()) {
        io::write_svg(ctx.file("profile.svg"), panels);
        ctx.loose_files.push_back("profile.svg");
    }
    ctx.manifest["tolerances"] = {{"ode_tol", tol}, {"h", h}};
}

// ---- angle-map -------------------------------------------------------------

void cmd_angle_map(Context& ctx, Block& b) {
    const double alpha = b.num("alpha", 1.0, 0.0, 1.0);
    const double c_max = b.num("c_max", 3.0, 1e-6, 20.0);
    const int n = static_cast<int>(b.integer("n", 150, 1, 100000));
    const double tol = b.num("tol", 1e-12, 1e-14, 1e-6);
    b.finish();
    ctx.manifest["figure"] = "limit angle theta_{c,alpha} as a function of c";

    std::vector<double> c(n + 1), th(n + 1, std::numeric_limits<double>::quiet_NaN());
    std::vector<std::string> err(n + 1);
    for (int i = 0; i <= n; ++i) c[i] = c_max * i / n;
    ctx.runs.resize(1);
    auto& rec = ctx.runs[0];
    rec.name = "angle_map_alpha_" + short_num(alpha);
    guarded(ctx, rec, [&]() {
        parallel_for(n + 1, ctx.threads, [&](int i) {
            try {
                th[i] = limit_angle(ProfileParams(c[i], alpha), tol);
            } catch (const std::exception& e) {
                err[i] = e.what(); // marked in the table, not fatal
            }
        });
    });
    io::CsvWriter w(ctx.file("angle_map.csv"), {"c", "angle", "closed_form", "ok"});
    io::Polyline num, exact;
    exact.dashed = true, exact.color = "#d62728";
    int failures = 0;
    json failed = json::array();
    for (int i = 0; i <= n; ++i) {
        const double cf = alpha == 1.0 ? limit_angle_alpha1(c[i]) : std::numeric_limits<double>::quiet_NaN();
        const bool ok = err[i].empty() && std::isfinite(th[i]);
        w.row({c[i], th[i], cf, ok ? 1.0 : 0.0});
        num.x.push_back(c[i]), num.y.push_back(th[i]);
        if (alpha == 1.0) exact.x.push_back(c[i]), exact.y.push_back(cf);
        if (!ok) {
            ++failures;
            failed.push_back({{"c", c[i]}, {"error", err[i]}});
        }
    }
    io::Panel P{"alpha = " + io::detail::g3(alpha), "c", "theta", {num}};
    if (alpha == 1.0) P.lines.push_back(exact);
    io::write_svg(ctx.file("angle_map.svg"), {P}, 560, 320);
    rec.files = {"angle_map.csv", "angle_map.svg"};
    rec.metrics = {{"points", n + 1}, {"failed_points", failed}};
    if (alpha == 1.0) {
        double dev = 0.0;
        for (int i = 0; i <= n; ++i)
            if (std::isfinite(th[i])) dev = std::max(dev, std::abs(th[i] - limit_angle_alpha1(c[i])));
        rec.metrics["max_closed_form_deviation"] = dev;
    }
    ctx.manifest["tolerances"] = {{"ode_tol", tol}};
}

// ---- evolve ----------------------------------------------------------------

Grid1D parse_grid(Block& b, double x_min, double x_max, long n, const std::string& boundary) {
    const double a = b.num("x_min", x_min), z = b.num("x_max", x_max);
    const long m = b.integer("n", n, 8, 10'000'000);
    const auto bd = b.str("boundary", boundary, {"pinned", "periodic"});
    if (!(z > a)) throw ConfigError("grid: x_max must exceed x_min");
    return Grid1D(a, z, static_cast<int>(m), bd == "pinned" ? Boundary::Pinned : Boundary::Periodic);
}

json grid_json(const Grid1D& g) {
    return {{"x_min", g.x_min}, {"x_max", g.x_max}, {"n", g.n}, {"h", g.h()},
            {"boundary", g.boundary == Boundary::Pinned ? "pinned" : "periodic"}};
}

// Seeded smooth perturbation: three unit-width bumps with random centres in the
// middle half of the domain and amplitudes in [-1, 1].
RealField perturbation(const Grid1D& g, double amp, std::uint64_t seed) {
    RealField p(g.n, 0.0);
    if (amp == 0.0) return p;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double mid = 0.5 * (g.x_min + g.x_max), quarter = 0.25 * (g.x_max - g.x_min);
    for (int j = 0; j < 3; ++j) {
        const double x0 = mid + quarter * (2.0 * U(rng) - 1.0), a = 2.0 * U(rng) - 1.0;
        for (int i = 0; i < g.n; ++i) p[i] += amp * a * std::exp(-sqr(g.x(i) - x0)) / 3.0;
    }
    return p;
}

void cmd_evolve(Context& ctx, Block& b) {
    const auto form = b.str("formulation", "llg", {"llg", "ll", "hydro", "dnls"});
    Block gb = b.sub("grid");
    const Grid1D g = parse_grid(gb, -40.0, 40.0, 801, form == "hydro" ? "periodic" : "pinned");
    b.adopt("grid", gb);

    Block ib = b.sub("initial");
    const auto type = ib.str("type", form == "hydro" || form == "ll" ? "soliton" : "self_similar",
                             {"soliton", "self_similar", "constant"});
    std::vector<double> cs, as;
    double pc = 0.0, palpha = 0.0, t0 = 0.0;
    std::string pkind;
    std::vector<double> m0;
    if (type == "soliton") {
        cs = ib.nums("c", {0.6}, -0.999, 0.999);
        as = ib.nums("a", std::vector<double>(cs.size(), 0.0));
        if (as.size() != cs.size()) throw ConfigError("initial.a must have one entry per soliton speed");
    } else if (type == "self_similar") {
        pkind = ib.str("kind", "expander", {"expander", "shrinker"});
        pc = ib.num("c", 0.5, 0.0, 50.0);
        palpha = ib.num("alpha", 0.5, 0.0, 1.0);
        t0 = ib.num("t0", 1.0, 1e-6, 1e6);
    } else {
        m0 = ib.vec3("m", {0.0, 1.0, 0.0});
    }
    const double perturb = ib.num("perturb", 0.0, 0.0, 0.5);
    b.adopt("initial", ib);

    const double alpha = b.num("alpha", 0.5, 0.0, 1.0);
    const double l1 = b.num("lambda1", 0.0, 0.0, 1e6), l3 = b.num("lambda3", form == "llg" ? 0.0 : 1.0, 0.0, 1e6);
    const double T = b.num("T", 1.0, 0.0, 1e6);
    SolverConfig cfg;
    const auto scheme = b.str("scheme", "rk4-fd4", {"rk4-fd4", "spectral-rk4", "midpoint"});
    cfg.scheme = scheme == "rk4-fd4" ? Scheme::RK4FD4 : scheme == "spectral-rk4" ? Scheme::SpectralRK4 : Scheme::MidpointImplicit;
    cfg.dt = b.num("dt", 0.0, 0.0, 1e3);
    cfg.cfl = b.num("cfl", 0.0, 0.0, 10.0);
    cfg.sample_dt = b.num("sample_dt", 0.0, 0.0, 1e6);
    cfg.frame_stride = static_cast<int>(b.integer("frame_stride", 1, 0, 1'000'000));
    cfg.pseudo_energy_k = static_cast<int>(b.integer("pseudo_energy_k", 0, 0, 8));
    Block guards = b.sub("guards");
    cfg.blowup_ceiling = guards.num("blowup_ceiling", 50.0, 0.0, 1e300);
    cfg.vacuum_delta = guards.num("vacuum_delta", 1e-3, 0.0, 1.0);
    cfg.pole_ceiling = guards.num("pole_ceiling", 1e6, 0.0, 1e300);
    b.adopt("guards", guards);
    b.finish();
    if (cfg.pseudo_energy_k == 1) throw ConfigError("pseudo_energy_k must be 0 or at least 2");
    if (type == "soliton" && std::find(cs.begin(), cs.end(), 0.0) != cs.end() && form == "hydro")
        throw ConfigError("initial.c = 0 has no hydrodynamical form");
    cfg.max_steps = ctx.max_steps;
    cfg.t0 = t0;

    // initial data on the sphere (and in hydro form when asked)
    const RealField pert = perturbation(g, perturb, ctx.seed);
    std::vector<SolitonSpec> specs;
    for (std::size_t j = 0; j < cs.size(); ++j) specs.push_back(SolitonSpec{cs[j], as[j], 0.0, 1});

    ctx.runs.resize(1);
    auto& rec = ctx.runs[0];
    rec.name = form + "_" + type;
    struct Series {
        std::vector<double> t, E, P, sq;
        std::vector<std::vector<double>> Ek;
    } d;
    std::vector<double> ft;
    std::vector<SpinField> frames;
    RunInfo info;
    json mod = nullptr;
    guarded(ctx, rec, [&]() {
        auto spin_data = [&]() {
            SpinField f{g, std::vector<Vec3>(g.n)};
            if (type == "soliton") {
                if (specs.size() == 1) {
                    for (int i = 0; i < g.n; ++i) f.m[i] = soliton_profile(specs[0].c, g.x(i) - specs[0].a);
                } else {
                    f = sum_solitons(specs, g).to_sphere();
                }
            } else if (type == "self_similar") {
                f = self_similar_field(pkind == "expander" ? ProfileKind::Expander : ProfileKind::Shrinker,
                                       ProfileParams(pc, palpha), g, t0);
            } else {
                const Vec3 v = Vec3(m0[0], m0[1], m0[2]).normalized();
                std::fill(f.m.begin(), f.m.end(), v);
            }
            for (int i = 0; i < g.n; ++i) {
                f.m[i][2] += pert[i];
                f.m[i].normalize();
            }
            return f;
        };
        if (form == "hydro") {
            HydroState st;
            if (type == "soliton") st = sum_solitons(specs, g).state;
            else {
                auto [v, w] = hydro_fields(spin_data());
                st = HydroState(g, v, w);
            }
            if (type == "soliton")
                for (int i = 0; i < g.n; ++i) st.v[i] += pert[i];
            st = HydroState(g, st.v, st.w);
            auto tr = evolve_hydro(st, l3, T, cfg);
            d = {tr.diag.t, tr.diag.E, tr.diag.P, tr.diag.sqrt_t_grad, tr.diag.Ek};
            ft = tr.t;
            for (const auto& s : tr.frames) frames.push_back(from_hydrodynamical(s.v, s.w, g));
            info = tr.info;
            if (type == "soliton" && !tr.frames.empty()) {
                auto mf = modulation_fit(tr.t, tr.frames, specs);
                io::CsvWriter w(ctx.file("modulation.csv"), [&]() {
                    std::vector<std::string> h{"t"};
                    for (std::size_t j = 0; j < specs.size(); ++j) h.push_back("a" + std::to_string(j + 1));
                    for (std::size_t j = 0; j < specs.size(); ++j) h.push_back("adot" + std::to_string(j + 1));
                    h.push_back("distance");
                    return h;
                }());
                double worst_d = 0.0, worst_v = 0.0;
                for (std::size_t k = 0; k < mf.t.size(); ++k) {
                    std::vector<double> r{mf.t[k]};
                    for (double a : mf.a[k]) r.push_back(a);
                    for (std::size_t j = 0; j < specs.size(); ++j) {
                        r.push_back(mf.adot[k][j]);
                        worst_v = std::max(worst_v, std::abs(mf.adot[k][j] - specs[j].c));
                    }
                    r.push_back(mf.distance[k]);
                    worst_d = std::max(worst_d, mf.distance[k]);
                    w.row(r);
                }
                mod = {{"max_distance", worst_d}, {"max_speed_error", worst_v}};
                rec.files.push_back("modulation.csv");
            }
        } else if (form == "dnls") {
            auto u0 = stereographic_field(spin_data());
            auto tr = evolve_dnls(u0, g, alpha, T, cfg);
            ft = tr.t;
            info = tr.info;
            for (const auto& u : tr.frames) frames.push_back(sphere_from_stereographic(u, g));
            // diagnostics recomputed on the stored frames
            for (std::size_t k = 0; k < frames.size(); ++k) {
                auto mx = fd::d1(g, frames[k].m, 4);
                RealField e(g.n);
                double sup = 0.0;
                for (int i = 0; i < g.n; ++i) e[i] = 0.5 * mx[i].squaredNorm(), sup = std::max(sup, mx[i].norm());
                d.t.push_back(ft[k]);
                d.E.push_back(trapezoid(g, e));
                d.sq.push_back(std::sqrt(ft[k]) * sup);
            }
        } else {
            auto f = spin_data();
            auto tr = form == "llg" ? evolve_llg(f, alpha, T, cfg, AnisotropyParams(l1, l3))
                                    : evolve_ll(f, AnisotropyParams(l1, l3), T, cfg);
            d = {tr.diag.t, tr.diag.E, tr.diag.P, tr.diag.sqrt_t_grad, tr.diag.Ek};
            ft = tr.t;
            frames = tr.frames;
            info = tr.info;
        }
        if (info.status == RunStatus::GuardAborted) rec.status = "guard-aborted", rec.message = info.message;
    });
    // partial output is still written for failed runs that produced nothing: skip then
    if (rec.status != "failed") {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        auto at = [&](const std::vector<double>& v, std::size_t k) { return k < v.size() ? v[k] : nan; };
        std::vector<std::string> h{"t", "E", "P"};
        for (std::size_t j = 0; j < d.Ek.size(); ++j) h.push_back("E_" + std::to_string(j + 2));
        for (std::string s : {"sqrt_t_grad_sup", "E_drift", "P_drift"}) h.push_back(s);
        io::CsvWriter w(ctx.file("diagnostics.csv"), h);
        for (std::size_t k = 0; k < d.t.size(); ++k) {
            std::vector<double> r{d.t[k], at(d.E, k), at(d.P, k)};
            for (const auto& e : d.Ek) r.push_back(at(e, k));
            r.push_back(at(d.sq, k));
            r.push_back(at(d.E, k) / at(d.E, 0) - 1.0);
            r.push_back(at(d.P, k) / at(d.P, 0) - 1.0);
            w.row(r);
        }
        io::CsvWriter tw(ctx.file("trajectory.csv"), {"t", "x", "m1", "m2", "m3"});
        for (std::size_t k = 0; k < frames.size(); ++k)
            for (int i = 0; i < g.n; ++i) tw.row({ft[k], g.x(i), frames[k].m[i][0], frames[k].m[i][1], frames[k].m[i][2]});
        rec.files.insert(rec.files.begin(), {"diagnostics.csv", "trajectory.csv"});
        rec.metrics = {{"steps", info.steps}, {"dt", info.dt}, {"t_end", info.t_end}};
        if (!d.E.empty()) rec.metrics["E_drift"] = io::number(d.E.back() / d.E.front() - 1.0);
        if (!d.P.empty()) rec.metrics["P_drift"] = io::number(d.P.back() / d.P.front() - 1.0);
        if (!mod.is_null()) rec.metrics["modulation"] = mod;
    }
    ctx.manifest["scheme"] = form == "dnls" ? "lawson-rk4 (exact linear propagator)" : form == "hydro" ? "spectral-rk4" : scheme;
    ctx.manifest["grid"] = grid_json(g);
    ctx.manifest["guards"] = {{"blowup_ceiling", cfg.blowup_ceiling}, {"vacuum_delta", cfg.vacuum_delta},
                              {"pole_ceiling", cfg.pole_ceiling}, {"max_steps", cfg.max_steps}};
    ctx.manifest["seeds"] = {{"perturbation", ctx.seed}};
}

// ---- regime ----------------------------------------------------------------

json report_json(const ConvergenceReport& r) {
    return {{"study", r.study},
            {"norm", r.norm},
            {"param", io::numbers(r.param)},
            {"error", io::numbers(r.error)},
            {"bound_quantity", io::numbers(r.bound_quantity)},
            {"kappa", io::numbers(r.kappa)},
            {"notes", r.notes},
            {"slope", io::number(r.slope)},
            {"fit",
             {{"slope", io::number(r.fit.fit.slope)},
              {"intercept", io::number(r.fit.fit.intercept)},
              {"rms", io::number(r.fit.fit.rms)},
              {"dropped_largest", r.fit.dropped_largest},
              {"points_used", r.fit.used}}}};
}

void report_csv(const fs::path& p, const ConvergenceReport& r, const std::string& pname) {
    io::CsvWriter w(p, {pname, "error", "bound_quantity", "slope"});
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < r.param.size(); ++i)
        w.row({r.param[i], i < r.error.size() ? r.error[i] : nan, i < r.bound_quantity.size() ? r.bound_quantity[i] : nan,
               r.slope});
}

void cmd_regime(Context& ctx, Block& b) {
    const auto study = b.str("study", "sg-sweep", {"sg-sweep", "wave-sweep", "cls-sweep"});
    const auto eps = b.nums("eps", {0.2, 0.1, 0.05, 0.025}, 0.0, 1.0);
    const double t_star = b.num("t_star", study == "cls-sweep" ? 0.5 : 1.0, 0.0, 1e4);
    const long k = b.integer("k", study == "sg-sweep" ? 4 : 3, 1, 8);
    std::string norm;
    double sigma = 1.0, eps_small = 1e-3, A = 1.0;
    long m = 0;
    std::vector<double> sigmas;
    if (study == "sg-sweep") {
        norm = b.str("norm", "L2", {"L2", "dsin", "Hk-3"});
        sigma = b.num("sigma", 1.0, 1e-12, 1e6);
    } else if (study == "wave-sweep") {
        sigmas = b.nums("sigma", {1e-2, 1e-3, 1e-4}, 1e-12, 1e6);
        eps_small = b.num("eps_small", 1e-3, 1e-12, 1.0);
        m = b.integer("m", 0, 0, 1);
    } else {
        A = b.num("A", 1.0, 0.0, 1e6);
    }
    Block db = b.sub("data");
    const auto family = db.str("family", "gaussian", study == "cls-sweep" ? std::vector<std::string>{"gaussian"}
                                                                          : std::vector<std::string>{"gaussian", "broad"});
    const double amp = db.num("amplitude", study == "cls-sweep" ? 1.0 : 0.5, 0.0, 1e3);
    const long npts = db.integer("n", 256, 16, 1 << 20);
    const double L = db.num("half_width", 20.0, 1e-3, 1e6);
    b.adopt("data", db);
    Block sb = b.sub("solver");
    RegimeSolverConfig cfg;
    cfg.dt = sb.num("dt", 0.0, 0.0, 1.0);
    cfg.dt_cap = sb.num("dt_cap", 2e-3, 1e-8, 1.0);
    b.adopt("solver", sb);
    b.finish();
    for (std::size_t i = 1; i < eps.size(); ++i)
        if (!(eps[i] < eps[i - 1])) throw ConfigError("regime.eps must be strictly decreasing");
    cfg.max_steps = ctx.max_steps;

    ctx.runs.resize(1);
    auto& rec = ctx.runs[0];
    rec.name = study;
    json rep;
    guarded(ctx, rec, [&]() {
        if (study == "sg-sweep") {
            SgData d{family, amp, static_cast<int>(npts), L};
            auto r = sg_convergence_study(d, eps, sigma, t_star, norm, static_cast<int>(k), cfg);
            rep = report_json(r);
            report_csv(ctx.file("report.csv"), r, "eps");
            rec.files = {"report.json", "report.csv"};
        } else if (study == "wave-sweep") {
            SgData de{family, amp, static_cast<int>(npts), L}, ds{"broad", amp, static_cast<int>(npts), L};
            auto r = wave_regime_study(de, eps, ds, sigmas, eps_small, t_star, static_cast<int>(m), static_cast<int>(k), cfg);
            rep = {{"study", "wave-sweep"},
                   {"slope", io::number(r.in_sigma.slope)},
                   {"in_eps", report_json(r.in_eps)},
                   {"in_sigma", report_json(r.in_sigma)}};
            report_csv(ctx.file("report_eps.csv"), r.in_eps, "eps");
            report_csv(ctx.file("report_sigma.csv"), r.in_sigma, "sigma");
            rec.files = {"report.json", "report_eps.csv", "report_sigma.csv"};
        } else {
            NlsData d{family, amp, static_cast<int>(npts), L};
            auto r = cls_convergence_study(d, eps, t_star, static_cast<int>(k), A, cfg);
            rep = report_json(r);
            report_csv(ctx.file("report.csv"), r, "eps");
            rec.files = {"report.json", "report.csv"};
        }
        io::write_json(ctx.file("report.json"), rep);
        rec.metrics = {{"slope", rep["slope"]}};
    });
    ctx.manifest["tolerances"] = {{"dt", cfg.dt}, {"dt_cap", cfg.dt_cap}};
}

// ---- rough -----------------------------------------------------------------

void cmd_rough(Context& ctx, Block& b) {
    const auto exp = b.str("experiment", "jump", {"norms", "jump", "multiplicity", "duhamel", "calibrate"});
    ctx.manifest["calibrated_defaults"] = {
        {"C", calibrated_contraction_C},
        {"theta_star", theta_star_from_audit(calibrated_contraction_C)},
        {"label", "calibrated numerical defaults standing in for non-explicit constants; not analytic values"}};
    ctx.runs.resize(1);
    auto& rec = ctx.runs[0];
    rec.name = exp;

    if (exp == "norms") {
        const double c = b.num("c", 0.5, 0.0, 10.0), alpha = b.num("alpha", 0.5, 1e-6, 1.0);
        const double L = b.num("half_width", 20.0, 1.0, 1e4);
        const long n = b.integer("n", 801, 16, 1'000'000);
        const double t_min = b.num("t_min", 0.05, 1e-8, 1e6), t_max = b.num("t_max", 400.0, 1e-8, 1e8);
        const long samples = b.integer("samples", 60, 2, 100000);
        b.finish();
        if (!(t_max > t_min)) throw ConfigError("rough.t_max must exceed rough.t_min");
        guarded(ctx, rec, [&]() {
            const Grid1D g(-L, L, static_cast<int>(n), Boundary::Pinned);
            const ProfileParams p(c, alpha);
            auto x = x_seminorm(self_similar_trajectory(p, g, t_min, t_max, static_cast<int>(samples)));
            const double bmo = bmo_seminorm(jump_field(JumpData::of_profile(p), g).m);
            json j = {{"c", c},
                      {"alpha", alpha},
                      {"sup_sqrt_t_grad", x.sup_sqrt_t_grad},
                      {"carleson", x.carleson},
                      {"x_seminorm", x.seminorm()},
                      {"x_bound", 4.0 * c / std::pow(alpha, 0.25)},
                      {"bmo_initial", bmo},
                      {"bmo_bound", 2.0 * c * std::sqrt(2.0 * pi) / std::sqrt(alpha)},
                      {"grid", grid_json(g)},
                      {"times", {{"t_min", t_min}, {"t_max", t_max}, {"samples", samples}}}};
            io::write_json(ctx.file("norms.json"), j);
            rec.files = {"norms.json"};
            rec.metrics = {{"x_seminorm", x.seminorm()}, {"bmo_initial", bmo}};
        });
    } else if (exp == "jump") {
        const double alpha = b.num("alpha", 0.5, 1e-6, 1.0);
        JumpData jd;
        bool from_profile = !(b.has("A_plus") || b.has("A_minus"));
        double c = 0.0;
        std::vector<double> ap, am;
        if (from_profile) c = b.num("c", 0.1, 0.0, 10.0);
        else {
            ap = b.vec3("A_plus", {1, 0, 0});
            am = b.vec3("A_minus", {1, 0, 0});
        }
        JumpConfig jc;
        jc.half_width = b.num("half_width", jc.half_width, 1.0, 1e4);
        jc.h = b.num("h", jc.h, 1e-4, 1.0);
        jc.t_end = b.num("t_end", jc.t_end, 1e-6, 1e4);
        jc.tol = b.num("tol", jc.tol, 0.0, 1.0);
        jc.theta_star = b.num("theta_star", jc.theta_star, 0.0, pi);
        b.finish();
        guarded(ctx, rec, [&]() {
            jd = from_profile ? JumpData::of_profile(ProfileParams(c, alpha))
                              : JumpData(Vec3(ap[0], ap[1], ap[2]).normalized(), Vec3(am[0], am[1], am[2]).normalized());
            auto r = jump_experiment(jd, alpha, jc);
            json j = {{"A_plus", io::to_json(jd.A_plus)},
                      {"A_minus", io::to_json(jd.A_minus)},
                      {"alpha", alpha},
                      {"theta", r.theta},
                      {"c_fit", r.c_fit},
                      {"R_fit", io::to_json(r.R_fit)},
                      {"residual", r.residual},
                      {"within_tol", r.within_tol}};
            io::write_json(ctx.file("experiment.json"), j);
            io::CsvWriter w(ctx.file("evolved.csv"), {"x", "m1", "m2", "m3"});
            for (int i = 0; i < r.evolved.grid.n; ++i)
                w.row({r.evolved.grid.x(i), r.evolved.m[i][0], r.evolved.m[i][1], r.evolved.m[i][2]});
            rec.files = {"experiment.json", "evolved.csv"};
            rec.metrics = {{"c_fit", r.c_fit}, {"residual", r.residual}};
            if (!r.within_tol) rec.message = "fit residual above tolerance";
        });
        ctx.manifest["tolerances"] = {{"fit_tol", jc.tol}, {"h", jc.h}, {"theta_star", jc.theta_star}};
    } else if (exp == "multiplicity") {
        const double theta = b.num("theta", pi, 0.0, pi), alpha = b.num("alpha", 1.0, 1e-6, 1.0);
        const long k = b.integer("k", 4, 1, 1000);
        const double c_max = b.num("c_max", 4.0, 1e-3, 100.0), dc = b.num("dc", 0.02, 1e-5, 1.0);
        b.finish();
        guarded(ctx, rec, [&]() {
            auto s = multiplicity_scan(theta, alpha, static_cast<int>(k), c_max, dc);
            io::CsvWriter w(ctx.file("scan.csv"), {"c", "angle", "root"});
            for (std::size_t i = 0; i < s.c_grid.size(); ++i) w.row({s.c_grid[i], s.angle_grid[i], 0.0});
            for (double r : s.roots) w.row({r, theta, 1.0});
            io::write_json(ctx.file("roots.json"), {{"theta", theta},
                                                    {"alpha", alpha},
                                                    {"roots", io::numbers(s.roots)},
                                                    {"complete", s.complete},
                                                    {"note", s.note}});
            rec.files = {"scan.csv", "roots.json"};
            rec.metrics = {{"roots_found", s.roots.size()}, {"complete", s.complete}};
        });
    } else if (exp == "duhamel") {
        const auto data = b.str("data", "jump", {"jump", "gaussian"});
        const double alpha = b.num("alpha", 0.5, 1e-6, 1.0), T = b.num("T", 1.0, 1e-6, 1e4);
        const double c = data == "jump" ? b.num("c", 0.1, 0.0, 10.0) : 0.0;
        const double A = data == "gaussian" ? b.num("amplitude", 1.0, 0.0, 1e3) : 0.0;
        const double L = b.num("half_width", 12.0, 1.0, 1e4), h = b.num("h", 0.05, 1e-4, 1.0);
        const double tol = b.num("tol", 1e-10, 1e-15, 1.0);
        DuhamelConfig dc;
        dc.time_steps = static_cast<int>(b.integer("time_steps", dc.time_steps, 4, 1'000'000));
        dc.max_iterations = static_cast<int>(b.integer("max_iterations", dc.max_iterations, 1, 100000));
        dc.C = b.num("C", dc.C, 1e-12, 1e12);
        b.finish();
        guarded(ctx, rec, [&]() {
            const Grid1D g(-L, L, static_cast<int>(std::lround(2.0 * L / h)) + 1, Boundary::Pinned);
            ComplexField u0(g.n);
            if (data == "jump") u0 = stereographic_field(mollified_jump(JumpData::of_profile(ProfileParams(c, alpha)), g, h));
            else
                for (int i = 0; i < g.n; ++i) u0[i] = A * std::exp(-sqr(g.x(i)));
            auto r = duhamel_solve(u0, g, alpha, T, tol, dc);
            json j = {{"status", to_string(r.status)},
                      {"iterations", r.iterations},
                      {"distances", io::numbers(r.distances)},
                      {"contraction_factor", io::number(r.contraction_factor)},
                      {"max_factor", io::number(r.max_factor)},
                      {"audit",
                       {{"C", r.audit.C}, {"bmo", r.audit.bmo}, {"eps_max", r.audit.eps_max}, {"passes", r.audit.passes}}},
                      {"message", r.message},
                      {"grid", grid_json(g)}};
            if (data == "jump") {
                auto ex = stereographic_field(self_similar_field(ProfileKind::Expander, ProfileParams(c, alpha), g, T));
                double e = 0.0;
                for (int i = 0; i < g.n; ++i) e = std::max(e, std::abs(ex[i] - r.final_state[i]));
                j["error_vs_self_similar"] = e;
            }
            io::write_json(ctx.file("duhamel.json"), j);
            io::CsvWriter w(ctx.file("duhamel_state.csv"), {"x", "re_u", "im_u"});
            for (int i = 0; i < g.n; ++i) w.row({g.x(i), r.final_state[i].real(), r.final_state[i].imag()});
            rec.files = {"duhamel.json", "duhamel_state.csv"};
            rec.metrics = {{"status", to_string(r.status)}, {"iterations", r.iterations}};
            if (r.status != DuhamelStatus::Converged) rec.message = "Picard iteration did not converge: " + to_string(r.status);
        });
    } else {
        const double alpha = b.num("alpha", 0.5, 1e-6, 1.0), T = b.num("T", 1.0, 1e-6, 1e4);
        const double L = b.num("half_width", 20.0, 1.0, 1e4);
        const long n = b.integer("n", 401, 16, 1'000'000);
        b.finish();
        guarded(ctx, rec, [&]() {
            const Grid1D g(-L, L, static_cast<int>(n), Boundary::Pinned);
            auto cal = calibrate_contraction_constant(alpha, g, T);
            io::write_json(ctx.file("calibration.json"),
                           {{"amplitude", cal.amplitude}, {"bmo", cal.bmo}, {"C", cal.C},
                            {"theta_star", theta_star_from_audit(cal.C)}, {"grid", grid_json(g)}});
            rec.files = {"calibration.json"};
            rec.metrics = {{"C", cal.C}};
        });
    }
}

// ---- soliton-report --------------------------------------------------------

void cmd_soliton_report(Context& ctx, Block& b) {
    const auto cs = b.nums("c", {0.3, 0.5, 0.7}, -0.999, 0.999);
    const double L = b.num("half_width", 40.0, 1.0, 1e4), h = b.num("h", 1e-3, 1e-5, 1.0);
    const double dc = b.num("dc", 1e-3, 1e-6, 0.1);
    b.finish();
    for (double c : cs)
        if (c == 0.0) throw ConfigError("soliton_report.c = 0 has no hydrodynamical form");
    const Grid1D g(-L, L, static_cast<int>(std::lround(2.0 * L / h)) + 1, Boundary::Pinned);
    const int n = static_cast<int>(cs.size());
    std::vector<json> out(n);
    ctx.runs.resize(n);
    parallel_for(n, ctx.threads, [&](int i) {
        auto& rec = ctx.runs[i];
        rec.name = "soliton_c_" + short_num(cs[i]);
        guarded(ctx, rec, [&]() {
            const double c = cs[i];
            auto P = [&](double cc) { return functional_momentum(hydro_soliton_state(cc, g)); };
            const double dPdc = (8.0 * (P(c + dc) - P(c - dc)) - (P(c + 2 * dc) - P(c - 2 * dc))) / (12.0 * dc);
            auto s = hydro_soliton_state(c, g);
            auto r = coercivity_check(c, g);
            out[i] = {{"c", c},
                      {"E", functional_energy(s)},
                      {"P", functional_momentum(s)},
                      {"dPdc", dPdc},
                      {"E_closed_form", soliton_energy(c)},
                      {"P_closed_form", soliton_momentum(c)},
                      {"dPdc_closed_form", soliton_momentum_slope(c)},
                      {"eig_kernel", r.eig_kernel},
                      {"eig_negative", r.eig_negative},
                      {"negative_count", r.negative_count},
                      {"Lambda_c", r.Lambda_c},
                      {"grid", grid_json(g)}};
            rec.metrics = {{"Lambda_c", r.Lambda_c}};
        });
    });
    json all = json::array();
    for (int i = 0; i < n; ++i)
        if (!out[i].is_null()) all.push_back(out[i]);
    io::write_json(ctx.file("soliton_report.json"), {{"reports", all}});
    ctx.loose_files.push_back("soliton_report.json");
}

// ---- driver ----------------------------------------------------------------

const std::map<std::string, std::pair<std::string, void (*)(Context&, Block&)>> commands{
    {"profile", {"profile", cmd_profile}},
    {"angle-map", {"angle_map", cmd_angle_map}},
    {"evolve", {"evolve", cmd_evolve}},
    {"regime", {"regime", cmd_regime}},
    {"rough", {"rough", cmd_rough}},
    {"soliton-report", {"soliton_report", cmd_soliton_report}},
};

int run(const std::string& command, const std::string& config_path, const std::string& out_flag, std::optional<std::uint64_t> seed_flag,
        int threads) {
    Context ctx;
    ctx.command = command;
    ctx.threads = std::max(1, threads);
    json cfg;
    json resolved;
    try {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot read config file '" + config_path + "'");
        try {
            cfg = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        Block root(cfg, "");
        const auto tagname = root.str("command", "");
        if (tagname.empty()) throw ConfigError("'command' is required");
        if (tagname != command) throw ConfigError("config command '" + tagname + "' does not match subcommand '" + command + "'");
        const auto& [block, fn] = commands.at(command);
        ctx.out = out_flag.empty() ? fs::path(root.str("out", "out")) : fs::path(out_flag);
        if (!out_flag.empty()) root.str("out", "");
        ctx.seed = seed_flag ? *seed_flag : static_cast<std::uint64_t>(root.integer("seed", 0, 0, 1L << 53));
        if (seed_flag) root.integer("seed", 0, 0, 1L << 53);
        root.resolved["seed"] = ctx.seed;
        root.resolved["out"] = ctx.out.string();
        Block caps = root.sub("caps");
        ctx.max_steps = caps.integer("max_steps", ctx.max_steps, 1, 1L << 62);
        ctx.wall_time = caps.num("wall_time_s", 0.0, 0.0, 1e9);
        root.adopt("caps", caps);
        if (!root.has(block)) throw ConfigError("missing parameter block '" + block + "'");
        Block params = root.sub(block);
        root.finish();
        fs::create_directories(ctx.out);
        ctx.manifest["config"] = cfg;
        fn(ctx, params); // parses (and finishes) its block before any work
        root.resolved[block] = params.resolved;
        resolved = root.resolved;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const DomainError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_numeric;
    }

    // manifest (no timings: identical config and seed give identical bytes)
    json runs = json::array();
    Failure worst = Failure::None;
    std::ostringstream timing;
    for (const auto& r : ctx.runs) {
        runs.push_back({{"name", r.name}, {"status", r.status}, {"message", r.message}, {"files", r.files}, {"metrics", r.metrics}});
        timing << r.name << ' ' << io::fmt17(r.seconds) << '\n';
        if (r.failure == Failure::Numeric || (r.failure == Failure::Domain && worst == Failure::None)) worst = r.failure;
        if (r.status == "failed") std::cerr << r.name << ": " << r.message << '\n';
    }
    timing << "total " << io::fmt17(ctx.elapsed()) << '\n';
    std::ofstream(ctx.file("timing.txt")) << timing.str();
    ctx.manifest["tool"] = "llgctl";
    ctx.manifest["version"] = LLG_VERSION;
    ctx.manifest["command"] = command;
    ctx.manifest["resolved"] = resolved;
    ctx.manifest["runs"] = runs;
    auto files = ctx.loose_files;
    files.push_back("timing.txt");
    ctx.manifest["files"] = files;
    io::write_json(ctx.file("manifest.json"), ctx.manifest);
    return worst == Failure::Numeric ? exit_numeric : worst == Failure::Domain ? exit_config : exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"llgctl: Landau-Lifshitz(-Gilbert) numerical experiments"};
    app.require_subcommand(1);
    std::string config, out;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string chosen;
    std::vector<CLI::Option*> seed_opts;
    for (const auto& [name, _] : commands) {
        auto* sc = app.add_subcommand(name, "run the " + name + " experiment");
        sc->add_option("--config", config, "JSON experiment config")->required();
        sc->add_option("--out", out, "output directory (overrides the config)");
        seed_opts.push_back(sc->add_option("--seed", seed, "random seed (overrides the config)"));
        sc->add_option("--threads", threads, "worker threads for independent runs")->check(CLI::PositiveNumber);
        sc->callback([&chosen, name = name]() { chosen = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_config;
    }
    std::optional<std::uint64_t> seed_flag;
    for (auto* o : seed_opts)
        if (o->count() > 0) seed_flag = seed;
    return run(chosen, config, out, seed_flag, threads);
}
