#include "forma/metrics.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

namespace forma {

PairScore f1_iou(const Tensor& pred, const Tensor& truth) {
    if (pred.shape() != truth.shape())
        throw DimensionError("f1_iou: shape mismatch " + shape_str(pred.shape()) + " vs " +
                             shape_str(truth.shape()));
    PairScore s;
    for (std::int64_t i = 0; i < pred.size(); ++i) {
        const double p = pred.data()[i], t = truth.data()[i];
        if ((p != 0.0 && p != 1.0) || (t != 0.0 && t != 1.0))
            throw DomainError("f1_iou: maps must be 0/1");
        if (p != 0.0 && t != 0.0) ++s.counts.tp;
        else if (p != 0.0) ++s.counts.fp;
        else if (t != 0.0) ++s.counts.fn;
        else ++s.counts.tn;
    }
    const std::int64_t tp = s.counts.tp, fp = s.counts.fp, fn = s.counts.fn;
    if (tp + fp + fn == 0) {
        s.f1 = 1.0;  // nothing to find and nothing predicted
        s.iou = 1.0;
        return s;
    }
    if (tp + fp == 0 || tp + fn == 0) {
        // one side empty, the other not: total miss either way
        s.f1 = 0.0;
        s.iou = 0.0;
        return s;
    }
    s.f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    s.iou = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    return s;
}

DatasetScore summarize(const std::string& name, const std::vector<ImageResult>& results) {
    DatasetScore d;
    d.name = name;
    d.images = static_cast<std::int64_t>(results.size());
    for (const auto& r : results) {
        d.mean_f1 += r.score.f1;
        d.mean_iou += r.score.iou;
    }
    if (d.images > 0) {
        d.mean_f1 /= static_cast<double>(d.images);
        d.mean_iou /= static_cast<double>(d.images);
    }
    return d;
}

AverageScore dataset_average(const std::vector<DatasetScore>& sets) {
    AverageScore a;
    for (const auto& s : sets) {
        if (s.images < 0) throw DomainError("dataset_average: negative image count");
        a.f1 += s.mean_f1 * static_cast<double>(s.images);
        a.iou += s.mean_iou * static_cast<double>(s.images);
        a.images += s.images;
    }
    if (a.images == 0) throw DomainError("dataset_average: no images in any dataset");
    a.f1 /= static_cast<double>(a.images);
    a.iou /= static_cast<double>(a.images);
    return a;
}

std::string format_score_table(const std::vector<DatasetScore>& sets) {
    std::ostringstream os;
    os << std::left << std::setw(24) << "dataset" << std::right << std::setw(8) << "images"
       << std::setw(10) << "F1" << std::setw(10) << "IoU" << '\n';
    os << std::string(52, '-') << '\n';
    for (const auto& s : sets)
        os << std::left << std::setw(24) << s.name << std::right << std::setw(8) << s.images
           << std::fixed << std::setprecision(4) << std::setw(10) << s.mean_f1
           << std::setw(10) << s.mean_iou << '\n';
    if (sets.size() > 1) {
        const AverageScore a = dataset_average(sets);
        os << std::string(52, '-') << '\n';
        os << std::left << std::setw(24) << "average" << std::right << std::setw(8)
           << a.images << std::fixed << std::setprecision(4) << std::setw(10) << a.f1
           << std::setw(10) << a.iou << '\n';
    }
    return os.str();
}

void write_results_jsonl(const std::string& path, const std::vector<ImageResult>& results) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write results to '" + path + "'");
    for (const auto& r : results) {
        nlohmann::json j{{"image", r.id},
                         {"f1", r.score.f1},
                         {"iou", r.score.iou},
                         {"tp", r.score.counts.tp},
                         {"fp", r.score.counts.fp},
                         {"fn", r.score.counts.fn}};
        f << j.dump() << '\n';
    }
    if (!f) throw IoError("short write on '" + path + "'");
}

}  // namespace forma
