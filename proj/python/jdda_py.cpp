// Python bindings: losses, center updates, the schedule and whole experiments.
// Matrices cross the boundary as 2-D float64 numpy arrays.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "jdda/experiment.hpp"
#include "jdda/gradcheck.hpp"
#include "jdda/numerics.hpp"

namespace py = pybind11;
using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

namespace {

jdda::Matrix to_matrix(const Array& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
    const auto rows = static_cast<std::size_t>(a.shape(0));
    const auto cols = static_cast<std::size_t>(a.shape(1));
    return jdda::Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

py::object to_array(const jdda::Matrix& m) {
    if (m.empty()) return py::none();
    Array out({m.rows(), m.cols()});
    std::copy(m.values().begin(), m.values().end(), out.mutable_data());
    return std::move(out);
}

jdda::LossWeights weights(double alpha, double beta, double m1, double m2) {
    jdda::LossWeights w;
    w.alpha = alpha;
    w.beta = beta;
    w.m1 = m1;
    w.m2 = m2;
    w.validate();
    return w;
}

py::dict loss_dict(const jdda::LossValue& v) {
    py::dict d;
    d["value"] = v.value;
    d["grad_source"] = to_array(v.grad_source);
    d["grad_target"] = to_array(v.grad_target);
    d["terms"] = v.terms;
    return d;
}

py::object optional_float(const std::optional<double>& v) {
    return v ? py::object(py::float_(*v)) : py::none();
}

py::dict result_dict(const jdda::AggregateResult& result) {
    py::list runs, cells;
    for (const auto& r : result.runs) {
        py::dict d;
        d["method"] = std::string(jdda::to_string(r.method));
        d["lambda2"] = optional_float(r.lambda2);
        d["seed"] = r.seed;
        d["target_accuracy"] = r.target_accuracy;
        d["source_accuracy"] = r.source_accuracy;
        d["source_compactness"] = r.source_compactness;
        runs.append(d);
    }
    for (const auto& c : result.cells) {
        py::dict d;
        d["method"] = std::string(jdda::to_string(c.method));
        d["lambda2"] = optional_float(c.lambda2);
        d["seeds"] = c.seeds;
        d["target_accuracy"] = c.target_accuracy;
        d["mean_target_accuracy"] = c.mean_target_accuracy;
        d["std_target_accuracy"] = optional_float(c.std_target_accuracy);
        d["mean_source_accuracy"] = c.mean_source_accuracy;
        d["mean_source_compactness"] = c.mean_source_compactness;
        cells.append(d);
    }
    py::dict out;
    out["runs"] = runs;
    out["cells"] = cells;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Joint domain alignment and discriminative feature learning";

    py::register_exception<jdda::ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<jdda::RunFailure>(m, "RunFailure", PyExc_RuntimeError);

    m.def("pairwise_euclidean", [](const Array& x, bool squared) {
        return to_array(jdda::pairwise_euclidean(to_matrix(x), squared));
    }, py::arg("features"), py::arg("squared") = false);

    m.def("centered_covariance", [](const Array& x) { return to_array(jdda::centered_covariance(to_matrix(x))); },
          py::arg("features"));

    m.def("coral_loss", [](const Array& hs, const Array& ht) {
        return loss_dict(jdda::coral_loss(to_matrix(hs), to_matrix(ht)));
    }, py::arg("h_source"), py::arg("h_target"));

    m.def("instance_loss", [](const Array& h, const std::vector<int>& labels, double alpha, double m1, double m2) {
        return loss_dict(jdda::instance_discriminative_loss(to_matrix(h), labels, weights(alpha, 1.0, m1, m2)));
    }, py::arg("h_source"), py::arg("labels"), py::arg("alpha") = 1.0, py::arg("m1") = 0.0, py::arg("m2") = 100.0);

    m.def("center_loss", [](const Array& h, const std::vector<int>& labels, const Array& centers, double beta,
                            double m1, double m2) {
        const auto state = jdda::CenterState::from_centers(to_matrix(centers), 0.5);
        return loss_dict(jdda::center_discriminative_loss(to_matrix(h), labels, state, weights(1.0, beta, m1, m2)));
    }, py::arg("h_source"), py::arg("labels"), py::arg("centers"), py::arg("beta") = 1.0, py::arg("m1") = 0.0,
       py::arg("m2") = 100.0);

    m.def("update_centers", [](const Array& centers, const Array& h, const std::vector<int>& labels, double gamma) {
        auto state = jdda::CenterState::from_centers(to_matrix(centers), gamma);
        return to_array(jdda::update_centers(std::move(state), to_matrix(h), labels).centers());
    }, py::arg("centers"), py::arg("h_source"), py::arg("labels"), py::arg("gamma") = 0.5);

    m.def("lambda_schedule", &jdda::lambda_schedule, py::arg("progress"), py::arg("mu") = 10.0);

    m.def("compactness_ratio", [](const Array& features, const std::vector<int>& labels, std::size_t classes) {
        return jdda::compactness_ratio(to_matrix(features), labels, classes);
    }, py::arg("features"), py::arg("labels"), py::arg("class_count"));

    m.def("gradient_suite", [](std::size_t instances, std::uint64_t seed) {
        jdda::GradCheckOptions options;
        options.instances = instances;
        options.seed = seed;
        py::list out;
        for (const auto& r : jdda::run_gradient_suite(options)) {
            py::dict d;
            d["name"] = r.name;
            d["instances"] = r.instances;
            d["max_rel_error"] = r.max_rel_error;
            d["passed"] = r.passed();
            out.append(d);
        }
        return out;
    }, py::arg("instances") = 100, py::arg("seed") = 0);

    m.def("config_keys", &jdda::config_keys);

    m.def("run_experiment", [](const std::map<std::string, std::string>& config, bool write) {
        const auto spec = jdda::parse_config(std::nullopt, config);
        py::gil_scoped_release release;
        auto result = write ? jdda::run_experiment(spec) : jdda::run_experiment_in_memory(spec);
        py::gil_scoped_acquire acquire;
        return result_dict(result);
    }, py::arg("config") = std::map<std::string, std::string>{}, py::arg("write") = false,
       "Runs every configured method and seed. Keys and values are the config-file ones as strings.");
}
