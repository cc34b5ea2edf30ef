#pragma once

#include <string>
#include <vector>

#include "forma/tensor.hpp"

namespace forma {

struct PixelCounts {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct PairScore {
    double f1 = 0.0;
    double iou = 0.0;
    PixelCounts counts;
};

// Pixel F1 and intersection-over-union of two 0/1 maps. Two empty masks
// score (1,1); exactly one empty mask scores (0,0).
PairScore f1_iou(const Tensor& pred, const Tensor& truth);

struct ImageResult {
    std::string id;
    PairScore score;
};

struct DatasetScore {
    std::string name;
    std::int64_t images = 0;
    double mean_f1 = 0.0;
    double mean_iou = 0.0;
};

DatasetScore summarize(const std::string& name, const std::vector<ImageResult>& results);

// Image-count-weighted mean over datasets.
struct AverageScore {
    double f1 = 0.0;
    double iou = 0.0;
    std::int64_t images = 0;
};
AverageScore dataset_average(const std::vector<DatasetScore>& sets);

// Report writers shared by the eval and robustness commands.
std::string format_score_table(const std::vector<DatasetScore>& sets);
void write_results_jsonl(const std::string& path, const std::vector<ImageResult>& results);

}  // namespace forma
