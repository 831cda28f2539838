#include "nullflow/serialize.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "nullflow/errors.hpp"
#include "nullflow/stencils.hpp"

static_assert(std::endian::native == std::endian::little,
              "the binary grid container assumes a little-endian host");

namespace nullflow {

namespace {

using nlohmann::ordered_json;

constexpr char kMagic[8] = {'N', 'F', 'G', 'R', 'I', 'D', '0', '1'};
constexpr std::size_t kNodeDoubles = 24;

void append(std::string& out, double x) {
    char buf[64];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", x);
    out.append(buf, static_cast<std::size_t>(n));
}

void append_vec(std::string& out, const Vec4& v) {
    for (int c = 0; c < 4; ++c) {
        out.push_back(',');
        append(out, v[c]);
    }
}

void put_u32(std::string& out, std::uint32_t x) {
    char buf[4];
    std::memcpy(buf, &x, 4);
    out.append(buf, 4);
}

void put_f64(std::string& out, double x) {
    char buf[8];
    std::memcpy(buf, &x, 8);
    out.append(buf, 8);
}

struct BinReader {
    std::string_view bytes;
    std::size_t pos = 0;

    void need(std::size_t n) {
        if (pos + n > bytes.size()) throw Error("truncated grid container");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t x;
        std::memcpy(&x, bytes.data() + pos, 4);
        pos += 4;
        return x;
    }
    double f64() {
        need(8);
        double x;
        std::memcpy(&x, bytes.data() + pos, 8);
        pos += 8;
        return x;
    }
};

ordered_json sample_json(const ResidualSample& s) {
    return ordered_json{{"du", s.du},         {"dt", s.dt},       {"ds", s.ds},
                        {"max_abs", s.max_abs}, {"rms", s.rms},   {"scale", s.scale},
                        {"nodes", s.nodes},   {"skipped", s.skipped}};
}

const char* kind_name(FrameKind kind) {
    return kind == FrameKind::PartiallyNull ? "partially_null" : "pseudo_null";
}

std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

std::string sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", x);
    return buf;
}

std::string fixed2(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return buf;
}

}  // namespace

std::string format_double(double x) {
    std::string out;
    append(out, x);
    return out;
}

std::string to_csv(const FramedCurve& c) {
    std::string out =
        "s,gamma1,gamma2,gamma3,gamma4,T1,T2,T3,T4,N1,N2,N3,N4,"
        "B1_1,B1_2,B1_3,B1_4,B2_1,B2_2,B2_3,B2_4,k1,k2,k3\n";
    for (std::size_t i = 0; i < c.s.size(); ++i) {
        append(out, c.s[i]);
        append_vec(out, c.position[i]);
        append_vec(out, c.frame[i].T);
        append_vec(out, c.frame[i].N);
        append_vec(out, c.frame[i].B1);
        append_vec(out, c.frame[i].B2);
        out.push_back(',');
        append(out, c.k1[i]);
        out.push_back(',');
        append(out, c.k2[i]);
        out.push_back(',');
        append(out, c.k3[i]);
        out.push_back('\n');
    }
    return out;
}

std::string to_csv(const CurveGrid& g) {
    std::string out =
        "u,t,gamma1,gamma2,gamma3,gamma4,T1,T2,T3,T4,N1,N2,N3,N4,"
        "B1_1,B1_2,B1_3,B1_4,B2_1,B2_2,B2_3,B2_4,v,k1,k2,k3\n";
    for (std::size_t j = 0; j < g.nt; ++j)
        for (std::size_t i = 0; i < g.nu; ++i) {
            const std::size_t k = g.idx(i, j);
            append(out, g.u(i));
            out.push_back(',');
            append(out, g.t(j));
            append_vec(out, g.position[k]);
            append_vec(out, g.frame[k].T);
            append_vec(out, g.frame[k].N);
            append_vec(out, g.frame[k].B1);
            append_vec(out, g.frame[k].B2);
            out.push_back(',');
            append(out, g.v[k]);
            out.push_back(',');
            append(out, g.k1[k]);
            out.push_back(',');
            append(out, g.k2[k]);
            out.push_back(',');
            append(out, g.k3[k]);
            out.push_back('\n');
        }
    return out;
}

std::string arclength_drift_csv(const CurveGrid& g) {
    std::string out = "t,arclength,drift\n";
    const double base = g.s[g.idx(g.nu - 1, 0)];
    for (std::size_t j = 0; j < g.nt; ++j) {
        const double total = g.s[g.idx(g.nu - 1, j)];
        append(out, g.t(j));
        out.push_back(',');
        append(out, total);
        out.push_back(',');
        append(out, total - base);
        out.push_back('\n');
    }
    return out;
}

std::string to_binary(const CurveGrid& g) {
    std::string out;
    out.reserve(48 + g.nu * g.nt * kNodeDoubles * 8);
    out.append(kMagic, 8);
    put_u32(out, g.kind == FrameKind::PartiallyNull ? 0u : 1u);
    put_u32(out, static_cast<std::uint32_t>(g.nu));
    put_u32(out, static_cast<std::uint32_t>(g.nt));
    put_u32(out, 0u);  // reserved
    put_f64(out, g.length);
    put_f64(out, g.du);
    put_f64(out, g.window);
    put_f64(out, g.dt);
    for (std::size_t j = 0; j < g.nt; ++j)
        for (std::size_t i = 0; i < g.nu; ++i) {
            const std::size_t k = g.idx(i, j);
            for (int c = 0; c < 4; ++c) put_f64(out, g.position[k][c]);
            for (int c = 0; c < 4; ++c) put_f64(out, g.frame[k].T[c]);
            for (int c = 0; c < 4; ++c) put_f64(out, g.frame[k].N[c]);
            for (int c = 0; c < 4; ++c) put_f64(out, g.frame[k].B1[c]);
            for (int c = 0; c < 4; ++c) put_f64(out, g.frame[k].B2[c]);
            put_f64(out, g.v[k]);
            put_f64(out, g.k1[k]);
            put_f64(out, g.k2[k]);
            put_f64(out, g.k3[k]);
        }
    return out;
}

CurveGrid grid_from_binary(std::string_view bytes) {
    BinReader r{bytes};
    r.need(8);
    if (std::memcmp(bytes.data(), kMagic, 8) != 0)
        throw Error("not a grid container (bad magic)");
    r.pos = 8;
    const std::uint32_t kind = r.u32();
    if (kind > 1) throw Error("unknown curve kind in grid container");
    CurveGrid g;
    g.kind = kind == 0 ? FrameKind::PartiallyNull : FrameKind::PseudoNull;
    g.nu = r.u32();
    g.nt = r.u32();
    r.u32();  // reserved
    g.length = r.f64();
    g.du = r.f64();
    g.window = r.f64();
    g.dt = r.f64();
    if (g.nu < 2 || g.nt < 1) throw Error("degenerate grid dimensions in container");
    const std::size_t total = g.nu * g.nt;
    r.need(total * kNodeDoubles * 8);
    g.position.resize(total);
    g.frame.resize(total);
    g.v.resize(total);
    g.k1.resize(total);
    g.k2.resize(total);
    g.k3.resize(total);
    g.s.assign(total, 0.0);
    for (std::size_t k = 0; k < total; ++k) {
        for (int c = 0; c < 4; ++c) g.position[k][c] = r.f64();
        for (int c = 0; c < 4; ++c) g.frame[k].T[c] = r.f64();
        for (int c = 0; c < 4; ++c) g.frame[k].N[c] = r.f64();
        for (int c = 0; c < 4; ++c) g.frame[k].B1[c] = r.f64();
        for (int c = 0; c < 4; ++c) g.frame[k].B2[c] = r.f64();
        g.v[k] = r.f64();
        g.k1[k] = r.f64();
        g.k2[k] = r.f64();
        g.k3[k] = r.f64();
    }
    if (r.pos != bytes.size()) throw Error("trailing bytes after grid container payload");
    std::vector<double> row(g.nu);
    for (std::size_t j = 0; j < g.nt; ++j) {
        for (std::size_t i = 0; i < g.nu; ++i) row[i] = g.v[g.idx(i, j)];
        const std::vector<double> s = cumulative_integral(row, g.du);
        for (std::size_t i = 0; i < g.nu; ++i) g.s[g.idx(i, j)] = s[i];
    }
    return g;
}

std::string report_json(const std::vector<ResidualReport>& reports, const std::string& scenario,
                        EvolutionMode mode) {
    ordered_json root;
    root["scenario"] = scenario;
    root["mode"] = mode == EvolutionMode::Transport ? "transport" : "position";
    root["all_pass"] = all_identities_pass(reports);
    ordered_json list = ordered_json::array();
    for (const auto& r : reports) {
        ordered_json item;
        item["identity"] = r.identity;
        item["variant"] = r.variant;
        item["printed"] = r.printed;
        item["pass"] = r.pass;
        item["exact"] = r.exact;
        item["skipped"] = r.skipped;
        item["order"] = r.order;
        item["note"] = r.note;
        ordered_json samples = ordered_json::array();
        for (const auto& s : r.samples) samples.push_back(sample_json(s));
        item["samples"] = std::move(samples);
        if (r.position_check)
            item["position_check"] = sample_json(*r.position_check);
        else
            item["position_check"] = nullptr;
        list.push_back(std::move(item));
    }
    root["identities"] = std::move(list);
    return root.dump(2) + "\n";
}

std::string report_text(const std::vector<ResidualReport>& reports) {
    std::size_t max_samples = 0;
    for (const auto& r : reports) max_samples = std::max(max_samples, r.samples.size());
    std::string out = pad("identity", 26) + pad("variant", 22) + pad("printed", 9);
    for (std::size_t k = 0; k < max_samples; ++k) out += pad("max|r| " + std::to_string(k), 12);
    out += pad("order", 8) + "status\n";
    for (const auto& r : reports) {
        out += pad(r.identity, 26);
        out += pad(r.variant.empty() ? "-" : r.variant, 22);
        out += pad(r.printed ? "yes" : "no", 9);
        for (std::size_t k = 0; k < max_samples; ++k)
            out += pad(k < r.samples.size() ? sci(r.samples[k].max_abs) : "-", 12);
        out += pad(r.skipped || r.exact ? "-" : fixed2(r.order), 8);
        if (r.skipped)
            out += "skipped";
        else if (r.exact)
            out += "exact";
        else
            out += r.pass ? "pass" : "FAIL";
        if (r.position_check) out += "  pos=" + sci(r.position_check->max_abs);
        if (!r.note.empty()) out += "  (" + r.note + ")";
        out.push_back('\n');
    }
    out += "\noverall: ";
    out += all_identities_pass(reports) ? "pass" : "FAIL";
    out.push_back('\n');
    return out;
}

std::string audit_json(const std::vector<AuditEntry>& entries, FrameKind kind,
                       std::uint64_t seed) {
    ordered_json root;
    root["kind"] = kind_name(kind);
    root["seed"] = seed;
    ordered_json list = ordered_json::array();
    for (const auto& e : entries) {
        ordered_json item;
        item["identity"] = e.identity;
        item["unique"] = e.unique;
        item["winner"] = e.winner;
        item["printed_wins"] = e.printed_wins;
        ordered_json vars = ordered_json::array();
        for (const auto& v : e.variants) {
            ordered_json vj;
            vj["variant"] = v.variant;
            vj["printed"] = v.printed;
            vj["converges"] = v.converges;
            vj["orders"] = v.orders;
            vj["residuals"] = v.residuals;
            vars.push_back(std::move(vj));
        }
        item["variants"] = std::move(vars);
        list.push_back(std::move(item));
    }
    root["identities"] = std::move(list);
    return root.dump(2) + "\n";
}

std::string audit_text(const std::vector<AuditEntry>& entries) {
    std::string out;
    for (const auto& e : entries) {
        out += e.identity + "\n";
        for (const auto& v : e.variants) {
            out += "  " + pad(v.variant, 24) + pad(v.printed ? "printed" : "alternative", 13);
            out += pad(v.converges ? "converges" : "diverges", 11);
            out += " ladders:";
            for (std::size_t sc = 0; sc < v.residuals.size(); ++sc) {
                if (sc) out += "  |";
                for (const double r : v.residuals[sc]) out += " " + sci(r);
            }
            out.push_back('\n');
        }
        if (e.unique)
            out += "  -> winner: " + e.winner +
                   (e.printed_wins ? " (the printed form)" : " (the printed form loses)") + "\n";
        else
            out += "  -> no unique winner\n";
    }
    return out;
}

void write_file(const std::string& path, std::string_view data) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error("short write to '" + path + "'");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::string out;
    in.seekg(0, std::ios::end);
    out.resize(static_cast<std::size_t>(in.tellg()));
    in.seekg(0);
    in.read(out.data(), static_cast<std::streamsize>(out.size()));
    if (!in) throw Error("short read from '" + path + "'");
    return out;
}

}  // namespace nullflow
