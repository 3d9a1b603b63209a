#include "percept/grad_stats.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "percept/error.hpp"

namespace percept {

namespace {

double l2_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

std::pair<double, double> grad_norm_stats(const std::vector<std::vector<double>>& samples,
                                          const std::vector<double>& weights) {
    if (samples.empty()) throw std::invalid_argument("grad_norm_stats: empty gradient history");
    const double wnorm = l2_norm(weights);
    if (wnorm == 0.0) throw std::invalid_argument("grad_norm_stats: zero weight norm");
    const size_t dim = samples[0].size();
    const double n = static_cast<double>(samples.size());
    double mean_sq = 0.0, std_sq = 0.0;
    for (size_t i = 0; i < dim; ++i) {
        double sum = 0.0, sumsq = 0.0;
        for (const auto& s : samples) {
            sum += s[i];
            sumsq += s[i] * s[i];
        }
        double mu = sum / n;
        double var = sumsq / n - mu * mu;
        if (var < 0.0) var = 0.0;
        mean_sq += mu * mu;
        std_sq += var;
    }
    return {std::sqrt(mean_sq) / wnorm, std::sqrt(std_sq) / wnorm};
}

void GradStats::begin_epoch(int part, int epoch) {
    part_ = part;
    epoch_ = epoch;
    accum_.clear();
}

void GradStats::record(const std::string& layer, const std::vector<double>& grad) {
    Accum& a = accum_[layer];
    if (a.sum.empty()) {
        a.sum.assign(grad.size(), 0.0);
        a.sumsq.assign(grad.size(), 0.0);
    }
    for (size_t i = 0; i < grad.size(); ++i) {
        a.sum[i] += grad[i];
        a.sumsq[i] += grad[i] * grad[i];
    }
    a.count++;
}

void GradStats::end_epoch(const std::map<std::string, const std::vector<double>*>& weights) {
    for (auto& [layer, a] : accum_) {
        auto it = weights.find(layer);
        if (it == weights.end()) {
            throw std::invalid_argument("grad stats: no weights for layer '" + layer + "'");
        }
        const double wnorm = l2_norm(*it->second);
        if (wnorm == 0.0) {
            throw std::invalid_argument("grad stats: zero weight norm for layer '" + layer + "'");
        }
        const double n = static_cast<double>(a.count);
        double mean_sq = 0.0, std_sq = 0.0;
        for (size_t i = 0; i < a.sum.size(); ++i) {
            double mu = a.sum[i] / n;
            double var = a.sumsq[i] / n - mu * mu;
            if (var < 0.0) var = 0.0;
            mean_sq += mu * mu;
            std_sq += var;
        }
        GradStatRow row;
        row.part = part_;
        row.epoch = epoch_;
        row.layer = layer;
        row.mean_norm = std::sqrt(mean_sq) / wnorm;
        row.std_norm = std::sqrt(std_sq) / wnorm;
        rows_.push_back(std::move(row));
    }
    accum_.clear();
}

void GradStats::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError(path + ": cannot open for writing");
    out << "part,epoch,layer,grad_mean_norm,grad_std_norm\n";
    out.precision(17);
    for (const auto& r : rows_) {
        out << r.part << "," << r.epoch << "," << r.layer << "," << r.mean_norm << ","
            << r.std_norm << "\n";
    }
}

}  // namespace percept
