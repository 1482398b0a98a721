#include <cmath>
#include <fstream>
#include <stdexcept>

#include "jdda/trainer.hpp"

namespace jdda {

namespace {

Accuracy score(const NetworkParams& params, const Matrix& features, std::span<const int> labels,
               std::size_t class_count) {
    if (features.rows() == 0) throw std::invalid_argument("evaluate: empty dataset");
    const std::vector<int> predicted = predict(params, features);
    std::vector<std::size_t> hits(class_count, 0);
    std::vector<std::size_t> totals(class_count, 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        if (y >= class_count) throw std::out_of_range("evaluate: label outside class range");
        ++totals[y];
        if (predicted[i] == labels[i]) {
            ++hits[y];
            ++correct;
        }
    }
    Accuracy acc;
    acc.overall = static_cast<double>(correct) / static_cast<double>(labels.size());
    for (std::size_t c = 0; c < class_count; ++c) {
        if (totals[c] == 0)
            acc.per_class.emplace_back(std::nullopt);
        else
            acc.per_class.emplace_back(static_cast<double>(hits[c]) / static_cast<double>(totals[c]));
    }
    return acc;
}

}  // namespace

Accuracy evaluate(const NetworkParams& params, const LabeledDataset& dataset) {
    return score(params, dataset.features, dataset.labels, dataset.class_count);
}

Accuracy evaluate(const NetworkParams& params, const UnlabeledDataset& dataset) {
    if (!dataset.has_held_out_labels())
        throw std::invalid_argument("evaluate: target dataset has no held-out labels");
    return score(params, dataset.features(), EvaluationAccess::labels(dataset), dataset.class_count());
}

void write_report_csv(const RunReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("report: cannot write " + path);
    out << "# jdda-curve v1\n";
    out << "iteration,source_loss,coral_loss,discriminative_loss,lambda1,target_accuracy,source_accuracy\n";
    out.precision(10);
    for (const auto& r : report.records) {
        out << r.iteration << ',' << r.source_loss << ',' << r.coral_loss << ',' << r.discriminative_loss
            << ',' << r.lambda1 << ',';
        if (!std::isnan(r.target_accuracy)) out << r.target_accuracy;
        out << ',' << r.source_accuracy << '\n';
    }
    if (!out) throw std::runtime_error("report: write failed for " + path);
}

}  // namespace jdda
