#include "nullflow/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "nullflow/errors.hpp"
#include "nullflow/expression.hpp"
#include "nullflow/frames.hpp"

namespace nullflow {
namespace {

struct Entry {
    std::string value;
    int line = 0;
};

struct Loader {
    std::map<std::string, Entry> entries;  // "section.key" -> value
    std::vector<std::string> issues;

    void fail(int line, const std::string& msg) {
        issues.push_back("line " + std::to_string(line) + ": " + msg);
    }
    void fail(const std::string& msg) { issues.push_back(msg); }

    const Entry* find(const std::string& key) const {
        const auto it = entries.find(key);
        return it == entries.end() ? nullptr : &it->second;
    }
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// section -> allowed keys
const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"scenario", {"kind", "mode", "gauge", "refinements", "seed"}},
        {"curvature", {"k1", "k2", "k3"}},
        {"frame", {"initial", "T", "N", "B1", "B2", "start"}},
        {"flow", {"c1", "c2", "c3", "c4"}},
        {"grid", {"length", "du", "window", "dt"}},
        {"output", {"dir"}},
        {"tolerance", {"pass_rtol", "min_order"}},
    };
    return s;
}

void scan(Loader& L, const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    bool any_content = false;
    while (std::getline(in, raw)) {
        ++line;
        const std::size_t cut = raw.find_first_of("#;");
        if (cut != std::string::npos) raw.erase(cut);
        const std::string_view sv = trim(raw);
        if (sv.empty()) continue;
        any_content = true;
        if (sv.front() == '[') {
            if (sv.back() != ']') {
                L.fail(line, "unterminated section header");
                continue;
            }
            section = std::string(trim(sv.substr(1, sv.size() - 2)));
            if (!schema().count(section)) {
                L.fail(line, "unknown section [" + section + "]");
                section.clear();
            }
            continue;
        }
        const std::size_t eq = sv.find('=');
        if (eq == std::string_view::npos) {
            L.fail(line, "expected 'key = value'");
            continue;
        }
        const std::string key(trim(sv.substr(0, eq)));
        const std::string value(trim(sv.substr(eq + 1)));
        if (section.empty()) {
            L.fail(line, "key '" + key + "' appears outside any section");
            continue;
        }
        if (!schema().at(section).count(key)) {
            L.fail(line, "unknown key '" + key + "' in [" + section + "]");
            continue;
        }
        const std::string full = section + "." + key;
        if (const Entry* prev = L.find(full)) {
            L.fail(line, "duplicate key '" + full + "' (first set at line " +
                             std::to_string(prev->line) + ")");
            continue;
        }
        L.entries.emplace(full, Entry{value, line});
    }
    if (!any_content) L.fail("the scenario file is empty");
}

double read_number(Loader& L, const std::string& key, double fallback, bool required) {
    const Entry* e = L.find(key);
    if (!e) {
        if (required) L.fail("missing required key '" + key + "'");
        return fallback;
    }
    double out = fallback;
    const char* first = e->value.data();
    const char* last = first + e->value.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last) {
        L.fail(e->line, "'" + key + "' must be a number, got '" + e->value + "'");
        return fallback;
    }
    return out;
}

std::uint64_t read_seed(Loader& L, const std::string& key, std::uint64_t fallback) {
    const Entry* e = L.find(key);
    if (!e) return fallback;
    std::uint64_t out = fallback;
    const char* first = e->value.data();
    const char* last = first + e->value.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last) {
        L.fail(e->line, "'" + key + "' must be an unsigned integer, got '" + e->value + "'");
        return fallback;
    }
    return out;
}

int read_int(Loader& L, const std::string& key, int fallback, int lo, int hi) {
    const Entry* e = L.find(key);
    if (!e) return fallback;
    int out = fallback;
    const char* first = e->value.data();
    const char* last = first + e->value.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last || out < lo || out > hi) {
        L.fail(e->line, "'" + key + "' must be an integer in [" + std::to_string(lo) + ", " +
                            std::to_string(hi) + "], got '" + e->value + "'");
        return fallback;
    }
    return out;
}

ExprPtr read_expr(Loader& L, const std::string& key, const char* fallback, bool required) {
    const Entry* e = L.find(key);
    if (!e) {
        if (required) {
            L.fail("missing required key '" + key + "'");
            return nullptr;
        }
        return parse_expression(fallback);
    }
    try {
        return parse_expression(e->value);
    } catch (const ParseError& err) {
        L.fail(e->line, "'" + key + "': " + err.what());
        return nullptr;
    }
}

bool read_vec4(Loader& L, const std::string& key, Vec4& out) {
    const Entry* e = L.find(key);
    if (!e) return false;
    std::vector<double> parts;
    std::string_view rest(e->value);
    while (true) {
        const std::size_t comma = rest.find(',');
        const std::string_view piece = trim(rest.substr(0, comma));
        double x = 0.0;
        const auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), x);
        if (ec != std::errc{} || ptr != piece.data() + piece.size()) {
            L.fail(e->line, "'" + key + "' must be four comma-separated numbers");
            return false;
        }
        parts.push_back(x);
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
    }
    if (parts.size() != 4) {
        L.fail(e->line, "'" + key + "' must have exactly four components, got " +
                            std::to_string(parts.size()));
        return false;
    }
    out = Vec4{parts[0], parts[1], parts[2], parts[3]};
    return true;
}

void check_variables(Loader& L, const std::string& key, const ExprPtr& e,
                     std::initializer_list<Var> allowed) {
    static const std::pair<Var, const char*> names[] = {
        {Var::U, "u"}, {Var::T, "t"}, {Var::S, "s"}};
    const Entry* entry = L.find(key);
    for (const auto& [v, name] : names) {
        if (std::find(allowed.begin(), allowed.end(), v) != allowed.end()) continue;
        if (uses_variable(e, v)) {
            if (entry)
                L.fail(entry->line,
                       "'" + key + "' must not depend on '" + name + "'");
            else
                L.fail("'" + key + "' must not depend on '" + std::string(name) + "'");
        }
    }
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& origin) {
    Loader L;
    scan(L, text);

    Scenario sc;
    sc.name = std::filesystem::path(origin).stem().string();
    EvolutionSetup& setup = sc.setup;

    // [scenario]
    if (const Entry* e = L.find("scenario.kind")) {
        if (e->value == "partially_null")
            setup.kind = FrameKind::PartiallyNull;
        else if (e->value == "pseudo_null")
            setup.kind = FrameKind::PseudoNull;
        else
            L.fail(e->line, "'scenario.kind' must be partially_null or pseudo_null, got '" +
                                e->value + "'");
    } else {
        L.fail("missing required key 'scenario.kind'");
    }
    if (const Entry* e = L.find("scenario.mode")) {
        if (e->value == "transport")
            setup.mode = EvolutionMode::Transport;
        else if (e->value == "position")
            setup.mode = EvolutionMode::Position;
        else
            L.fail(e->line,
                   "'scenario.mode' must be transport or position, got '" + e->value + "'");
    }
    if (const Entry* e = L.find("scenario.gauge")) {
        if (e->value == "reference")
            setup.gauge = GaugePolicy::ReferenceFrame;
        else if (e->value == "first_component")
            setup.gauge = GaugePolicy::FirstComponentUnit;
        else
            L.fail(e->line,
                   "'scenario.gauge' must be reference or first_component, got '" + e->value +
                       "'");
    }
    sc.refinements = read_int(L, "scenario.refinements", 3, 1, 8);
    sc.seed = read_seed(L, "scenario.seed", 0);

    // [curvature]
    setup.curvature.k1 = read_expr(L, "curvature.k1", "0", true);
    setup.curvature.k2 = read_expr(L, "curvature.k2", "0", true);
    setup.curvature.k3 = read_expr(L, "curvature.k3", "0", false);
    const std::size_t issues_before_curvature = L.issues.size();
    for (const auto& [key, expr] :
         {std::pair<const char*, ExprPtr>{"curvature.k1", setup.curvature.k1},
          {"curvature.k2", setup.curvature.k2},
          {"curvature.k3", setup.curvature.k3}})
        check_variables(L, key, expr, {Var::S});
    if (L.issues.size() == issues_before_curvature && setup.curvature.k1 && setup.curvature.k2 &&
        setup.curvature.k3) {
        try {
            validate_curvatures(setup.kind, setup.curvature);
        } catch (const Error& err) {
            L.fail(std::string("[curvature] ") + err.what());
        }
    }

    // [frame]
    bool explicit_frame = false;
    if (const Entry* e = L.find("frame.initial")) {
        if (e->value == "canonical")
            explicit_frame = false;
        else if (e->value == "explicit")
            explicit_frame = true;
        else
            L.fail(e->line,
                   "'frame.initial' must be canonical or explicit, got '" + e->value + "'");
    }
    setup.initial_frame = canonical_frame(setup.kind);
    if (explicit_frame) {
        bool got = true;
        got &= read_vec4(L, "frame.T", setup.initial_frame.T);
        got &= read_vec4(L, "frame.N", setup.initial_frame.N);
        got &= read_vec4(L, "frame.B1", setup.initial_frame.B1);
        got &= read_vec4(L, "frame.B2", setup.initial_frame.B2);
        if (!got) {
            L.fail("an explicit frame needs all of frame.T, frame.N, frame.B1, frame.B2");
        } else {
            const double res = max_frame_residual(setup.initial_frame);
            if (!(res <= 1e-9))
                L.fail("the explicit initial frame violates the metric relations "
                       "(max residual " +
                       std::to_string(res) + ", allowed 1e-9)");
        }
    } else {
        for (const char* key : {"frame.T", "frame.N", "frame.B1", "frame.B2"})
            if (const Entry* e = L.find(key))
                L.fail(e->line, std::string("'") + key + "' requires frame.initial = explicit");
    }
    read_vec4(L, "frame.start", setup.start);

    // [flow]
    setup.flow[0] = read_expr(L, "flow.c1", "0", true);
    setup.flow[1] = read_expr(L, "flow.c2", "0", true);
    setup.flow[2] = read_expr(L, "flow.c3", "0", true);
    setup.flow[3] = read_expr(L, "flow.c4", "0", true);
    for (int i = 0; i < 4; ++i)
        check_variables(L, "flow.c" + std::to_string(i + 1), setup.flow[i], {Var::U, Var::T});

    // [grid]
    setup.grid.length = read_number(L, "grid.length", setup.grid.length, true);
    setup.grid.du = read_number(L, "grid.du", setup.grid.du, true);
    setup.grid.window = read_number(L, "grid.window", setup.grid.window, true);
    setup.grid.dt = read_number(L, "grid.dt", setup.grid.dt, true);
    if (!(setup.grid.length > 0.0)) L.fail("'grid.length' must be positive");
    if (!(setup.grid.du > 0.0)) L.fail("'grid.du' must be positive");
    if (!(setup.grid.window > 0.0)) L.fail("'grid.window' must be positive");
    if (!(setup.grid.dt > 0.0)) L.fail("'grid.dt' must be positive");
    if (setup.grid.dt > 0.0 && setup.grid.du > 0.0 &&
        setup.grid.dt > setup.grid.du * (1.0 + 1e-12))
        L.fail("'grid.dt' must not exceed 'grid.du' (explicit time stepping)");
    if (setup.grid.dt > 0.0 && setup.grid.window > 0.0 &&
        setup.grid.window < 2.0 * setup.grid.dt * (1.0 - 1e-12))
        L.fail("'grid.window' must cover at least two time steps");

    // [output] and [tolerance]
    if (const Entry* e = L.find("output.dir")) sc.output_dir = e->value;
    sc.pass_rtol = read_number(L, "tolerance.pass_rtol", sc.pass_rtol, false);
    sc.min_order = read_number(L, "tolerance.min_order", sc.min_order, false);
    if (!(sc.pass_rtol > 0.0)) L.fail("'tolerance.pass_rtol' must be positive");
    if (!(sc.min_order > 0.0)) L.fail("'tolerance.min_order' must be positive");

    if (!L.issues.empty())
        throw ScenarioError("invalid scenario '" + origin + "'", std::move(L.issues));
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScenarioError("cannot open scenario '" + path + "'", {});
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path);
}

}  // namespace nullflow
