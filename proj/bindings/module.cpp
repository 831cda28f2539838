#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "nullflow/errors.hpp"
#include "nullflow/expression.hpp"
#include "nullflow/flow.hpp"
#include "nullflow/frames.hpp"
#include "nullflow/minkowski.hpp"
#include "nullflow/scenario.hpp"
#include "nullflow/serialize.hpp"
#include "nullflow/verify.hpp"

namespace py = pybind11;
using namespace nullflow;

namespace {

// ExprPtr is shared_ptr<const Expr>; wrap it so pybind11 sees a value type.
struct Expression {
    ExprPtr ptr;

    double call(std::optional<double> u, std::optional<double> t,
                std::optional<double> s) const {
        Bindings b;
        b.u = u;
        b.t = t;
        b.s = s;
        return eval(ptr, b);
    }
    Expression deriv(const std::string& var) const {
        Var v;
        if (var == "u")
            v = Var::U;
        else if (var == "t")
            v = Var::T;
        else if (var == "s")
            v = Var::S;
        else
            throw Error("unknown variable '" + var + "' (expected u, t or s)");
        return Expression{differentiate(ptr, v)};
    }
    std::string str() const { return to_string(ptr); }
};

Curvatures make_curvatures(const std::string& k1, const std::string& k2, const std::string& k3) {
    Curvatures c;
    c.k1 = parse_expression(k1);
    c.k2 = parse_expression(k2);
    c.k3 = parse_expression(k3);
    return c;
}

FramedCurve synth_py(const Scenario& sc) {
    const EvolutionSetup& s = sc.setup;
    return integrate_curve(s.kind, s.curvature, s.initial_frame, s.start, 0.0, s.grid.length,
                           s.grid.du);
}

std::string verify_report_py(const Scenario& sc, std::optional<int> refinements) {
    VerifyOptions opts;
    opts.refinements = refinements.value_or(sc.refinements);
    opts.mode = sc.setup.mode;
    opts.pass_rtol = sc.pass_rtol;
    opts.min_order = sc.min_order;
    return report_json(run_verification(sc.setup, opts), sc.name, opts.mode);
}

std::string sign_audit_py(FrameKind kind, std::uint64_t seed, int refinements) {
    AuditOptions opts;
    opts.seed = seed;
    opts.refinements = refinements;
    return audit_json(run_sign_audit(kind, opts), kind, seed);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Null curve flows in Minkowski 4-space: synthesis, evolution, verification";

    py::enum_<CausalClass>(m, "CausalClass")
        .value("Spacelike", CausalClass::Spacelike)
        .value("Timelike", CausalClass::Timelike)
        .value("Null", CausalClass::Null)
        .value("Zero", CausalClass::Zero);
    py::enum_<FrameKind>(m, "FrameKind")
        .value("PartiallyNull", FrameKind::PartiallyNull)
        .value("PseudoNull", FrameKind::PseudoNull);
    py::enum_<EvolutionMode>(m, "EvolutionMode")
        .value("Transport", EvolutionMode::Transport)
        .value("Position", EvolutionMode::Position);
    py::enum_<GaugePolicy>(m, "GaugePolicy")
        .value("ReferenceFrame", GaugePolicy::ReferenceFrame)
        .value("FirstComponentUnit", GaugePolicy::FirstComponentUnit);

    py::class_<Vec4>(m, "Vec4")
        .def(py::init<>())
        .def(py::init<double, double, double, double>())
        .def_readwrite("x1", &Vec4::x1)
        .def_readwrite("x2", &Vec4::x2)
        .def_readwrite("x3", &Vec4::x3)
        .def_readwrite("x4", &Vec4::x4)
        .def("__len__", [](const Vec4&) { return 4; })
        .def("__getitem__",
             [](const Vec4& v, int i) {
                 if (i < 0 || i > 3) throw py::index_error();
                 return v[i];
             })
        .def("__repr__", [](const Vec4& v) { return to_string(v); });

    py::class_<Frame4>(m, "Frame4")
        .def(py::init<>())
        .def_readwrite("T", &Frame4::T)
        .def_readwrite("N", &Frame4::N)
        .def_readwrite("B1", &Frame4::B1)
        .def_readwrite("B2", &Frame4::B2)
        .def_readwrite("kind", &Frame4::kind);

    py::class_<Expression>(m, "Expression")
        .def("__call__", &Expression::call, py::arg("u") = std::nullopt,
             py::arg("t") = std::nullopt, py::arg("s") = std::nullopt)
        .def("deriv", &Expression::deriv, py::arg("var"))
        .def("__str__", &Expression::str)
        .def("__repr__", [](const Expression& e) { return "Expression(" + e.str() + ")"; });

    py::class_<FramedCurve>(m, "FramedCurve")
        .def_readonly("kind", &FramedCurve::kind)
        .def_readonly("s", &FramedCurve::s)
        .def_readonly("position", &FramedCurve::position)
        .def_readonly("frame", &FramedCurve::frame)
        .def_readonly("k1", &FramedCurve::k1)
        .def_readonly("k2", &FramedCurve::k2)
        .def_readonly("k3", &FramedCurve::k3);

    py::class_<CurveGrid>(m, "CurveGrid")
        .def_readonly("kind", &CurveGrid::kind)
        .def_readonly("length", &CurveGrid::length)
        .def_readonly("du", &CurveGrid::du)
        .def_readonly("window", &CurveGrid::window)
        .def_readonly("dt", &CurveGrid::dt)
        .def_readonly("nu", &CurveGrid::nu)
        .def_readonly("nt", &CurveGrid::nt)
        .def_readonly("position", &CurveGrid::position)
        .def_readonly("frame", &CurveGrid::frame)
        .def_readonly("v", &CurveGrid::v)
        .def_readonly("k1", &CurveGrid::k1)
        .def_readonly("k2", &CurveGrid::k2)
        .def_readonly("k3", &CurveGrid::k3)
        .def_readonly("arclength", &CurveGrid::s)
        .def("idx", &CurveGrid::idx, py::arg("i"), py::arg("j"))
        .def("u", &CurveGrid::u, py::arg("i"))
        .def("t", &CurveGrid::t, py::arg("j"));

    py::class_<Scenario>(m, "Scenario")
        .def_readonly("name", &Scenario::name)
        .def_readonly("refinements", &Scenario::refinements)
        .def_readonly("seed", &Scenario::seed)
        .def_readonly("output_dir", &Scenario::output_dir);

    m.def("dot", &dot, py::arg("a"), py::arg("b"));
    m.def("norm", &norm, py::arg("v"));
    m.def("classify", &classify, py::arg("v"), py::arg("tol") = 1e-9);
    m.def(
        "parse_expression",
        [](const std::string& text) { return Expression{parse_expression(text)}; },
        py::arg("text"));
    m.def("canonical_frame", &canonical_frame, py::arg("kind"));
    m.def(
        "frame_residuals",
        [](const Frame4& f) {
            const auto arr = frame_residuals(f);
            return std::vector<double>(arr.begin(), arr.end());
        },
        py::arg("frame"));
    m.def("max_frame_residual", &max_frame_residual, py::arg("frame"));
    m.def(
        "integrate_curve",
        [](FrameKind kind, const std::string& k1, const std::string& k2, const std::string& k3,
           const Frame4& frame, const Vec4& start, double s0, double s1, double ds) {
            return integrate_curve(kind, make_curvatures(k1, k2, k3), frame, start, s0, s1, ds);
        },
        py::arg("kind"), py::arg("k1"), py::arg("k2"), py::arg("k3"), py::arg("frame"),
        py::arg("start"), py::arg("s0"), py::arg("s1"), py::arg("ds"));
    m.def("load_scenario", &load_scenario, py::arg("path"));
    m.def("parse_scenario", &parse_scenario, py::arg("text"), py::arg("origin") = "<memory>");
    m.def("synth", &synth_py, py::arg("scenario"));
    m.def(
        "simulate", [](const Scenario& sc) { return evolve(sc.setup); }, py::arg("scenario"));
    m.def("verify_report", &verify_report_py, py::arg("scenario"),
          py::arg("refinements") = std::nullopt,
          "Run the refinement ladder and return the residual report as a JSON string");
    m.def("sign_audit", &sign_audit_py, py::arg("kind"), py::arg("seed") = 0,
          py::arg("refinements") = 3,
          "Arbitrate ambiguous sign variants; returns the audit as a JSON string");
    m.def(
        "grid_csv", [](const CurveGrid& g) { return to_csv(g); }, py::arg("grid"));
    m.def(
        "curve_csv", [](const FramedCurve& c) { return to_csv(c); }, py::arg("curve"));

    py::register_exception<ScenarioError>(m, "ScenarioException", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ExpressionParseError", PyExc_ValueError);
    py::register_exception<NumericalAbort>(m, "NumericalAbortError", PyExc_RuntimeError);
}
