#include "dro/problem_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dro/baselines.hpp"

namespace dro {

using nlohmann::json;

namespace {

json vec_to_json(const Vec& v) { return json(v); }

Vec vec_from_json(const json& j) { return j.get<Vec>(); }

std::string family_name(LossFamily f) {
    switch (f) {
        case LossFamily::linear: return "linear";
        case LossFamily::hinge: return "hinge";
        case LossFamily::huber: return "huber";
    }
    return "?";
}

LossFamily family_from_name(const std::string& s) {
    if (s == "linear") return LossFamily::linear;
    if (s == "hinge") return LossFamily::hinge;
    if (s == "huber") return LossFamily::huber;
    throw std::invalid_argument("unknown loss family: " + s);
}

}  // namespace

std::string problem_to_json(const ProblemSpec& p) {
    json j;
    const LossEnsemble& ens = p.ensemble;
    j["dim"] = ens.dim();
    j["domain"] = {{"center", vec_to_json(ens.domain().center)},
                   {"radius", ens.domain().radius}};
    json losses = json::array();
    for (const Loss& l : ens.losses()) {
        json jl;
        jl["family"] = family_name(l.family);
        jl["a"] = vec_to_json(l.a);
        jl["b"] = l.b;
        if (l.family == LossFamily::huber) jl["delta"] = l.delta;
        losses.push_back(jl);
    }
    j["losses"] = losses;
    j["constants"] = {{"G", ens.lipschitz_G()},
                      {"R", ens.diameter_R()},
                      {"L", std::isfinite(ens.smoothness_L()) ? json(ens.smoothness_L())
                                                              : json(nullptr)},
                      {"B_loss", std::isfinite(ens.loss_bound_Bl()) ? json(ens.loss_bound_Bl())
                                                                    : json(nullptr)}};
    if (p.is_group()) {
        json rows = json::array();
        for (std::size_t i = 0; i < p.groups().m(); ++i) {
            json row = json::array();
            for (const auto& [idx, w] : p.groups().row(i))
                row.push_back(json::array({idx, w}));
            rows.push_back(row);
        }
        j["variant"] = {{"type", "group"}, {"rows", rows}};
    } else {
        const FdivVariant& f = p.fdiv();
        j["variant"] = {{"type", "fdiv"},
                        {"divergence", f.divergence.to_string()},
                        {"nu", f.divergence.nu},
                        {"constrained", f.constrained},
                        {"B_f", f.divergence.f_bound}};
    }
    j["eps"] = p.target_eps;
    return j.dump(2) + "\n";
}

ProblemSpec problem_from_json(const std::string& text) {
    const json j = json::parse(text);
    Domain dom{vec_from_json(j.at("domain").at("center")),
               j.at("domain").at("radius").get<double>()};
    std::vector<Loss> losses;
    for (const json& jl : j.at("losses")) {
        Loss l;
        l.family = family_from_name(jl.at("family").get<std::string>());
        l.a = vec_from_json(jl.at("a"));
        l.b = jl.at("b").get<double>();
        if (jl.contains("delta")) l.delta = jl.at("delta").get<double>();
        losses.push_back(std::move(l));
    }
    const json& c = j.at("constants");
    const double G = c.at("G").get<double>();
    const double R = c.at("R").get<double>();
    const double L = c.at("L").is_null() ? kInf : c.at("L").get<double>();
    const double Bl = c.at("B_loss").is_null() ? kInf : c.at("B_loss").get<double>();
    ProblemSpec p;
    p.ensemble = LossEnsemble(std::move(losses), std::move(dom), G, R, L, Bl);
    const json& v = j.at("variant");
    if (v.at("type") == "group") {
        std::vector<GroupWeights::Row> rows;
        for (const json& jr : v.at("rows")) {
            GroupWeights::Row row;
            for (const json& e : jr)
                row.emplace_back(e.at(0).get<std::uint32_t>(), e.at(1).get<double>());
            rows.push_back(std::move(row));
        }
        p.variant = GroupVariant{GroupWeights(p.ensemble.n(), std::move(rows))};
    } else if (v.at("type") == "fdiv") {
        FdivVariant f;
        f.divergence = Divergence::parse(v.at("divergence").get<std::string>(),
                                         p.ensemble.n(), v.at("nu").get<double>());
        if (v.contains("B_f")) f.divergence.f_bound = v.at("B_f").get<double>();
        f.constrained = v.value("constrained", false);
        p.variant = std::move(f);
    } else {
        throw std::invalid_argument("unknown variant type");
    }
    p.target_eps = j.at("eps").get<double>();
    p.validate();
    return p;
}

ProblemSpec load_problem(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open problem file: " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return problem_from_json(ss.str());
}

void save_problem(const ProblemSpec& problem, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write problem file: " + file.string());
    out << problem_to_json(problem);
}

std::string problem_digest(const ProblemSpec& problem) {
    const std::string s = problem_to_json(problem);
    std::uint64_t h = detail::fnv1a(s);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

static std::filesystem::path ref_path(const std::filesystem::path& problem_file) {
    std::filesystem::path p = problem_file;
    p += ".ref.json";
    return p;
}

double load_reference_optimum(const std::filesystem::path& problem_file) {
    std::ifstream in(ref_path(problem_file));
    if (!in) return std::numeric_limits<double>::quiet_NaN();
    json j;
    in >> j;
    return j.at("optimum").get<double>();
}

void save_reference_optimum(const std::filesystem::path& problem_file, double value) {
    std::ofstream out(ref_path(problem_file), std::ios::binary);
    json j;
    j["optimum"] = value;
    out << j.dump(2) << "\n";
}

ProblemSpec generate_problem(const GenerateConfig& cfg) {
    if (cfg.n == 0 || cfg.dim == 0) throw std::invalid_argument("generate: empty sizes");
    Rng rng(cfg.seed);
    Domain dom{Vec(cfg.dim, 0.0), cfg.domain_radius};

    auto random_direction = [&](double max_norm) {
        Vec a(cfg.dim);
        double n2 = 0.0;
        for (double& v : a) {
            v = rng.normal();
            n2 += v * v;
        }
        const double scale = max_norm * (0.25 + 0.75 * rng.uniform()) / std::sqrt(n2);
        for (double& v : a) v *= scale;
        return a;
    };

    std::vector<Loss> losses;
    losses.reserve(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        Loss l;
        l.a = random_direction(1.0);
        l.b = rng.uniform(-0.25, 0.25);
        if (cfg.family == "max-linear") {
            l.family = LossFamily::linear;
        } else if (cfg.family == "hinge-groups") {
            l.family = cfg.smooth ? LossFamily::huber : LossFamily::hinge;
            l.delta = 0.25;
        } else if (cfg.family == "cvar-reg" || cfg.family == "chi2-reg") {
            l.family = cfg.smooth ? LossFamily::huber : LossFamily::hinge;
            l.delta = 0.25;
            l.b = rng.uniform(0.0, 0.5);  // keep regression-style losses nonnegative-ish
        } else {
            throw std::invalid_argument("unknown family: " + cfg.family);
        }
        losses.push_back(std::move(l));
    }

    ProblemSpec p;
    p.ensemble = LossEnsemble::with_analytic_constants(std::move(losses), std::move(dom));
    p.target_eps = cfg.eps;

    if (cfg.family == "max-linear") {
        std::vector<GroupWeights::Row> rows(cfg.n);
        for (std::size_t i = 0; i < cfg.n; ++i)
            rows[i] = {{static_cast<std::uint32_t>(i), 1.0}};
        p.variant = GroupVariant{GroupWeights(cfg.n, std::move(rows))};
    } else if (cfg.family == "hinge-groups") {
        // Overlapping groups: each row draws k members with random weights.
        std::vector<GroupWeights::Row> rows(cfg.m);
        for (std::size_t i = 0; i < cfg.m; ++i) {
            const std::size_t k = 2 + rng.uniform_index(std::min<std::size_t>(cfg.n, 4));
            GroupWeights::Row row;
            double s = 0.0;
            for (std::size_t t = 0; t < k; ++t) {
                const std::uint32_t j = static_cast<std::uint32_t>(rng.uniform_index(cfg.n));
                const double w = 0.2 + rng.uniform();
                row.emplace_back(j, w);
                s += w;
            }
            long double acc = 0.0L;
            for (auto& [j, w] : row) {
                w /= s;
                acc += w;
            }
            // Pin the final weight so the row sums to 1 exactly.
            row.back().second += 1.0 - static_cast<double>(acc);
            rows[i] = std::move(row);
        }
        p.variant = GroupVariant{GroupWeights(cfg.n, std::move(rows))};
    } else {
        FdivVariant f;
        const std::string dspec = cfg.family == "cvar-reg"
                                      ? "cvar:alpha=" + std::to_string(cfg.alpha)
                                      : "chi2:rho=" + std::to_string(cfg.rho);
        f.divergence = Divergence::parse(dspec, cfg.n, cfg.nu);
        f.constrained = cfg.constrained;
        p.variant = std::move(f);
    }
    p.validate();
    return p;
}

double compute_reference_optimum(const ProblemSpec& problem, double eps) {
    const LossEnsemble& ens = problem.ensemble;
    if (ens.dim() <= 2) {
        const Vec& c = ens.domain().center;
        const double rad = ens.domain().radius;
        const int steps = 400;
        double best = kInf;
        if (ens.dim() == 1) {
            for (int i = -steps; i <= steps; ++i) {
                Vec x{c[0] + rad * i / steps};
                best = std::min(best, raw_objective_unmetered(problem, x));
            }
            return best;
        }
        for (int i = -steps; i <= steps; ++i) {
            for (int j = -steps; j <= steps; ++j) {
                const double dx = rad * i / steps, dy = rad * j / steps;
                if (dx * dx + dy * dy > rad * rad) continue;
                Vec x{c[0] + dx, c[1] + dy};
                best = std::min(best, raw_objective_unmetered(problem, x));
            }
        }
        return best;
    }
    // Long-run subgradient at 100x the eps budget on a metering-free copy.
    ProblemSpec copy;
    copy.ensemble = problem.ensemble;
    copy.variant = problem.variant;
    copy.target_eps = problem.target_eps;
    const double G = copy.ensemble.lipschitz_G(), R = copy.ensemble.diameter_R();
    const std::int64_t T =
        static_cast<std::int64_t>(std::ceil(100.0 * 4.0 * G * G * R * R / (eps * eps)));
    Rng rng(0x9e3779b9);
    Vec x = subgradient_solve_point(copy, T, rng, nullptr, {});
    return raw_objective_unmetered(copy, x);
}

}  // namespace dro
