#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "surfcdm/grid.hpp"

namespace surfcdm {

struct MetricsRecord {
    double dsc = 0.0;
    double iou = 0.0;
    double hd95 = 0.0;  // pixels
};

/// 2|A n B| / (|A| + |B|); 1 when both masks are empty.
double dsc(const CartesianMask& a, const CartesianMask& b);
/// |A n B| / |A u B|; 1 when both masks are empty.
double iou(const CartesianMask& a, const CartesianMask& b);
/// 95th percentile (linear interpolation) of the pooled nearest boundary
/// distances in both directions. Boundary pixels are foreground pixels with a
/// 4-neighbour in the background or outside the grid.
double hd95(const CartesianMask& a, const CartesianMask& b);

std::vector<std::pair<int, int>> boundary_pixels(const CartesianMask& mask);

/// Linear-interpolation percentile of `values` (q in [0, 100]).
double percentile(std::vector<double> values, double q);

/// hd95 with the empty-mask case mapped to the grid diagonal.
MetricsRecord compute_metrics(const CartesianMask& prediction, const CartesianMask& truth);

struct UncertaintyMap {
    Grid<double> mean;
    Grid<double> sd;  // population standard deviation
    int runs = 0;
};

UncertaintyMap uncertainty(std::span<const CartesianMask> masks);

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
};

struct EvaluationReport {
    std::vector<std::string> ids;
    std::vector<MetricsRecord> records;
    MeanSd dsc;
    MeanSd iou;
    MeanSd hd95;
};

/// Population mean and standard deviation.
MeanSd mean_sd(std::span<const double> values);

EvaluationReport summarize(std::vector<std::string> ids, std::vector<MetricsRecord> records);

/// `image_id,dsc,iou,hd95` rows plus one aggregate row `MEAN±SD`.
std::string report_to_csv(const EvaluationReport& report);

}  // namespace surfcdm
