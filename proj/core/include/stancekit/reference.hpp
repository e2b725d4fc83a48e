#pragma once

#include <string_view>

// Published results used as comparison rows in generated reports. These are
// never produced by this toolkit; reports mark them "reference, not
// reproduced".
namespace stancekit::reference {

struct Row {
  std::string_view model;
  std::string_view learning_rate;
  std::string_view batch_size;
  std::string_view dropout;
  std::string_view tags;
  double precision;
  double recall;
  double f1;
  double auc;
};

inline constexpr Row kZeroShot[] = {
    {"bart-large-mnli", "-", "-", "-", "single", 0.35, 0.34, 0.27, 0.58},
    {"bart-large-mnli", "-", "-", "-", "double", 0.32, 0.25, 0.25, 0.53},
    {"bart-large-mnli", "-", "-", "-", "multi", 0.43, 0.41, 0.38, 0.63},
    {"xlm-roberta-large-xnli", "-", "-", "-", "single", 0.28, 0.32, 0.28, 0.58},
    {"xlm-roberta-large-xnli", "-", "-", "-", "double", 0.25, 0.28, 0.25, 0.55},
    {"xlm-roberta-large-xnli", "-", "-", "-", "multi", 0.31, 0.33, 0.31, 0.58},
    {"xlm-roberta-large-xnli-anli", "-", "-", "-", "single", 0.31, 0.33, 0.27, 0.58},
    {"xlm-roberta-large-xnli-anli", "-", "-", "-", "double", 0.32, 0.30, 0.30, 0.56},
    {"xlm-roberta-large-xnli-anli", "-", "-", "-", "multi", 0.36, 0.35, 0.31, 0.59},
};

inline constexpr Row kStaticEmbedding[] = {
    {"cnn_embed", "-", "16", "0.4", "", 0.71, 0.69, 0.70, 0.81},
    {"cnn_embed", "-", "16", "0.5", "", 0.75, 0.68, 0.70, 0.82},
    {"cnn_embed", "-", "32", "0.4", "", 0.75, 0.71, 0.72, 0.83},
    {"cnn_embed", "-", "32", "0.5", "", 0.71, 0.69, 0.70, 0.81},
    {"bilstm_embed", "-", "16", "0.4", "", 0.69, 0.59, 0.59, 0.75},
    {"bilstm_embed", "-", "16", "0.5", "", 0.62, 0.60, 0.59, 0.75},
    {"bilstm_embed", "-", "32", "0.4", "", 0.62, 0.56, 0.56, 0.74},
    {"bilstm_embed", "-", "32", "0.5", "", 0.69, 0.60, 0.61, 0.76},
};

inline constexpr Row kTransformer[] = {
    {"bert", "1e-05", "16", "-", "", 0.65, 0.65, 0.65, 0.78},
    {"bert", "2e-05", "16", "-", "", 0.64, 0.64, 0.64, 0.78},
    {"bert", "3e-05", "16", "-", "", 0.66, 0.66, 0.66, 0.79},
    {"bert", "1e-05", "32", "-", "", 0.67, 0.67, 0.67, 0.79},
    {"bert", "2e-05", "32", "-", "", 0.67, 0.66, 0.67, 0.79},
    {"bert", "3e-05", "32", "-", "", 0.66, 0.66, 0.66, 0.79},
    {"roberta", "1e-05", "16", "-", "", 0.73, 0.71, 0.71, 0.82},
    {"roberta", "2e-05", "16", "-", "", 0.74, 0.73, 0.73, 0.83},
    {"roberta", "3e-05", "16", "-", "", 0.74, 0.73, 0.73, 0.83},
    {"roberta", "1e-05", "32", "-", "", 0.70, 0.68, 0.68, 0.80},
    {"roberta", "2e-05", "32", "-", "", 0.72, 0.72, 0.71, 0.82},
    {"roberta", "3e-05", "32", "-", "", 0.74, 0.74, 0.73, 0.83},
    {"bert_cnn_layerwise", "1e-05", "16", "-", "", 0.73, 0.70, 0.71, 0.81},
    {"bert_cnn_layerwise", "2e-05", "16", "-", "", 0.69, 0.69, 0.69, 0.81},
    {"bert_cnn_layerwise", "3e-05", "16", "-", "", 0.71, 0.71, 0.71, 0.82},
    {"bert_cnn_layerwise", "1e-05", "32", "-", "", 0.65, 0.65, 0.64, 0.78},
    {"bert_cnn_layerwise", "2e-05", "32", "-", "", 0.69, 0.67, 0.68, 0.80},
    {"bert_cnn_layerwise", "3e-05", "32", "-", "", 0.67, 0.67, 0.67, 0.80},
    {"bert_cnn_final", "1e-05", "16", "-", "", 0.74, 0.74, 0.74, 0.84},
    {"bert_cnn_final", "2e-05", "16", "-", "", 0.79, 0.76, 0.76, 0.85},
    {"bert_cnn_final", "3e-05", "16", "-", "", 0.77, 0.74, 0.75, 0.84},
    {"bert_cnn_final", "1e-05", "32", "-", "", 0.72, 0.70, 0.71, 0.82},
    {"bert_cnn_final", "2e-05", "32", "-", "", 0.73, 0.73, 0.72, 0.83},
    {"bert_cnn_final", "3e-05", "32", "-", "", 0.75, 0.73, 0.72, 0.83},
};

// Best configuration's F1 confidence interval and the annotation agreement.
inline constexpr double kBestF1CiLow = 0.70;
inline constexpr double kBestF1CiHigh = 0.82;
inline constexpr double kAnnotatorKappa = 0.828;
inline constexpr double kDedupRemovedFraction = 0.33;

}  // namespace stancekit::reference
