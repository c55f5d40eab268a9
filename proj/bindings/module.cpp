// Python bindings for the maskcal core: numpy arrays in, numpy arrays out.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "maskcal/baselines.hpp"
#include "maskcal/calibration.hpp"
#include "maskcal/distortion.hpp"
#include "maskcal/evaluation.hpp"
#include "maskcal/masker.hpp"
#include "maskcal/optimal_mask.hpp"
#include "maskcal/oracle.hpp"
#include "maskcal/synthetic.hpp"
#include "maskcal/tensor.hpp"

namespace py = pybind11;
using namespace maskcal;

namespace {

Tensor to_tensor(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() < 1 || arr.ndim() > 3) {
        throw ShapeError("expected a 1-, 2- or 3-d array");
    }
    std::vector<std::size_t> dims(arr.ndim());
    for (py::ssize_t i = 0; i < arr.ndim(); ++i) {
        dims[i] = static_cast<std::size_t>(arr.shape(i));
    }
    std::vector<double> values(arr.data(), arr.data() + arr.size());
    return Tensor(std::move(dims), std::move(values));
}

py::array_t<double> to_array(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.dims().begin(), t.dims().end());
    py::array_t<double> out(shape);
    std::copy(t.values().begin(), t.values().end(), out.mutable_data());
    return out;
}

using InArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Mask-based uncertainty calibration for image-to-image predictors.";

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

    // tensor core
    m.def("hadamard",
          [](const InArray& a, const InArray& b) {
              return to_array(hadamard(to_tensor(a), to_tensor(b)));
          },
          py::arg("a"), py::arg("b"), "Element-wise product.");
    m.def("mask_size",
          [](const InArray& m_) { return mask_size(to_tensor(m_)); }, py::arg("m"),
          "Average removed mass sum(1 - m) / n.");
    m.def("write_tensor",
          [](const std::string& path, const InArray& a, const std::string& dtype) {
              write_tensor(path, to_tensor(a), dtype == "f32" ? Dtype::f32 : Dtype::f64);
          },
          py::arg("path"), py::arg("tensor"), py::arg("dtype") = "f64");
    m.def("read_tensor",
          [](const std::string& path) { return to_array(read_tensor(path)); },
          py::arg("path"));
    m.def("read_pnm", [](const std::string& path) { return to_array(read_pnm(path)); },
          py::arg("path"));
    m.def("write_pnm",
          [](const std::string& path, const InArray& a, int maxval) {
              write_pnm(path, to_tensor(a), maxval);
          },
          py::arg("path"), py::arg("image"), py::arg("maxval") = 255);

    // distortions
    m.def("pnorm_distortion",
          [](const InArray& a, const InArray& b, double p) {
              return pnorm_distortion(to_tensor(a), to_tensor(b), p);
          },
          py::arg("a"), py::arg("b"), py::arg("p"));
    m.def("ssim_distortion",
          [](const InArray& a, const InArray& b) {
              return ssim_distortion(to_tensor(a), to_tensor(b));
          },
          py::arg("a"), py::arg("b"), "1 - MSSIM (11x11 Gaussian window).");
    m.def("distortion",
          [](const std::string& id, const InArray& a, const InArray& b) {
              return distortion(DistortionSpec::parse(id), to_tensor(a), to_tensor(b));
          },
          py::arg("id"), py::arg("a"), py::arg("b"));
    m.def("masked_distortion",
          [](const std::string& id, const InArray& m_, const InArray& y, const InArray& yh) {
              return masked_distortion(DistortionSpec::parse(id), to_tensor(m_), to_tensor(y),
                                       to_tensor(yh));
          },
          py::arg("id"), py::arg("m"), py::arg("y"), py::arg("y_hat"));
    m.def("masked_distortion_grad",
          [](const std::string& id, const InArray& m_, const InArray& y, const InArray& yh) {
              return to_array(masked_distortion_grad(DistortionSpec::parse(id), to_tensor(m_),
                                                     to_tensor(y), to_tensor(yh)));
          },
          py::arg("id"), py::arg("m"), py::arg("y"), py::arg("y_hat"));

    // optimal masks
    m.def("closed_form_mask",
          [](const std::vector<double>& d, double p, double alpha) {
              const MaskSolution sol = closed_form_mask({d, p, alpha});
              return py::make_tuple(py::array_t<double>(py::ssize_t(sol.mask.size()),
                                                        sol.mask.data()),
                                    sol.no_masking_needed);
          },
          py::arg("d"), py::arg("p"), py::arg("alpha"),
          "Returns (mask, no_masking_needed).");
    m.def("binary_mask",
          [](const std::vector<double>& d, double alpha) {
              const auto mask = binary_mask({d, 1.0, alpha});
              return py::array_t<double>(py::ssize_t(mask.size()), mask.data());
          },
          py::arg("d"), py::arg("alpha"));
    m.def("uncertainty_from_mask",
          [](const std::vector<double>& mask, double p) {
              return uncertainty_from_mask(mask, p);
          },
          py::arg("m"), py::arg("p"));

    // oracle
    m.def("optimize_mask",
          [](const InArray& y, const InArray& yh, const std::string& id, double alpha,
             double mu, double step_size, std::size_t max_iters, bool raise_on_stall) {
              OracleConfig cfg;
              cfg.mu = mu;
              cfg.step_size = step_size;
              cfg.max_iters = max_iters;
              cfg.target_alpha = alpha;
              OracleResult res;
              try {
                  res = optimize_mask(to_tensor(y), to_tensor(yh), DistortionSpec::parse(id),
                                      cfg);
              } catch (const OracleStalled& e) {
                  if (raise_on_stall) throw std::runtime_error(e.what());
                  res = e.best;
              }
              py::dict out;
              out["mask"] = to_array(res.mask);
              out["iterations"] = res.iterations;
              out["final_distortion"] = res.final_distortion;
              out["converged"] = res.converged;
              return out;
          },
          py::arg("y"), py::arg("y_hat"), py::arg("distortion"), py::arg("alpha"),
          py::arg("mu") = 2.0, py::arg("step_size") = 0.01, py::arg("max_iters") = 10000,
          py::arg("raise_on_stall") = false);

    // calibration
    m.def("calibrated_mask",
          [](const InArray& m_theta, double lam, double eps) {
              return to_array(calibrated_mask(to_tensor(m_theta), lam, eps));
          },
          py::arg("m_theta"), py::arg("lambda_"), py::arg("eps") = 1e-6);
    m.def("scaled_mask",
          [](const InArray& m_theta, double lam) {
              return to_array(scaled_mask(to_tensor(m_theta), lam));
          },
          py::arg("m_theta"), py::arg("lambda_"));
    m.def("find_lambda",
          [](const InArray& m_theta, const InArray& y, const InArray& yh,
             const std::string& id, double alpha, double eps, double eps_denominator,
             const std::string& form) {
              const LambdaResult r =
                  find_lambda(to_tensor(m_theta), to_tensor(y), to_tensor(yh),
                              DistortionSpec::parse(id), alpha, eps, eps_denominator,
                              parse_mask_form(form));
              return py::make_tuple(r.lambda, r.feasible);
          },
          py::arg("m_theta"), py::arg("y"), py::arg("y_hat"), py::arg("distortion"),
          py::arg("alpha"), py::arg("eps") = 1e-3, py::arg("eps_denominator") = 1e-6,
          py::arg("form") = "ratio", "Returns (lambda, feasible).");
    m.def("scan_lambda",
          [](const InArray& m_theta, const InArray& y, const InArray& yh,
             const std::string& id, double alpha, double eps, double eps_denominator,
             const std::string& form, std::size_t grid_points) {
              const LambdaResult r =
                  scan_lambda(to_tensor(m_theta), to_tensor(y), to_tensor(yh),
                              DistortionSpec::parse(id), alpha, eps, eps_denominator,
                              parse_mask_form(form), grid_points);
              return py::make_tuple(r.lambda, r.feasible);
          },
          py::arg("m_theta"), py::arg("y"), py::arg("y_hat"), py::arg("distortion"),
          py::arg("alpha"), py::arg("eps") = 1e-3, py::arg("eps_denominator") = 1e-6,
          py::arg("form") = "ratio", py::arg("grid_points") = 1024);
    m.def("conformal_lambda",
          [](std::vector<double> lambdas, double beta) {
              const ConformalLambda r = conformal_lambda(std::move(lambdas), beta);
              return py::make_tuple(r.lambda, r.index);
          },
          py::arg("lambdas"), py::arg("beta"),
          "Conservative order statistic; returns (lambda, 1-based index).");

    // baselines
    m.def("uni_scalar",
          [](std::vector<double> distortions, double p, double alpha, double beta) {
              return uni_scalar_from_distortions(std::move(distortions), p, alpha, beta);
          },
          py::arg("distortions"), py::arg("p"), py::arg("alpha"), py::arg("beta"));
    m.def("pinball_loss", &pinball_loss, py::arg("u"), py::arg("tau"));

    // masker features
    m.def("extract_features",
          [](const InArray& x, const InArray& yh) {
              const FeatureGrid grid = extract_features(to_tensor(x), to_tensor(yh));
              py::array_t<double> out({py::ssize_t(grid.height), py::ssize_t(grid.width),
                                       py::ssize_t(kFeatureDim)});
              std::copy(grid.values.begin(), grid.values.end(), out.mutable_data());
              return out;
          },
          py::arg("x"), py::arg("y_hat"), "Per-pixel feature grid (h, w, 7).");

    // evaluation
    m.def("pearson",
          [](const std::vector<double>& a, const std::vector<double>& b) -> py::object {
              const auto r = pearson(a, b);
              if (!r) return py::none();
              return py::float_(*r);
          },
          py::arg("a"), py::arg("b"));
    m.def("threshold_from_quantile",
          [](std::vector<double> values, double q) {
              return threshold_from_quantile(std::move(values), q);
          },
          py::arg("values"), py::arg("q"));
    m.def("coverage",
          [](const std::vector<double>& vals, double alpha) { return coverage(vals, alpha); },
          py::arg("masked_distortions"), py::arg("alpha"));
    m.def("expected_abs_moment",
          [](const std::string& noise, double scale, double p) {
              return expected_abs_moment(parse_noise(noise), scale, p);
          },
          py::arg("noise"), py::arg("scale"), py::arg("p"));

#ifdef MASKCAL_VERSION
    m.attr("__version__") = MASKCAL_VERSION;
#else
    m.attr("__version__") = "dev";
#endif
}
