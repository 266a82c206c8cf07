#pragma once

#include "repshift/dataset.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace repshift {

/// Which columns of a long-format CSV make up a panel.
struct PanelSchema {
    std::string subject_column;
    std::vector<std::string> covariates;
    std::string response;  // empty when the file has no response column
};

/// A loaded panel. Missing cells (empty, NA, NaN) are stored as NaN, so the
/// covariates need not lie in the unit cube until preprocessed.
struct Panel {
    std::vector<std::string> covariate_names;
    std::string response_name;
    RepeatedDataset data;
};

/// Rows are grouped by subject in order of first appearance; observation
/// order within a subject follows the file. Throws SchemaError for a column
/// missing from the header, ParseError (with line number) for a malformed
/// row and EmptyInputError when the file has no data rows.
Panel read_panel_csv(std::istream& is, const PanelSchema& schema);
Panel load_panel_csv(const std::string& path, const PanelSchema& schema);

/// Dataset CSV: optional "# ..." manifest line, then the header
/// subject_id,obs_id,x_1..x_d[,y]. Values are written with 17 significant
/// digits.
void write_dataset_csv(std::ostream& os, const RepeatedDataset& data, const std::string& manifest = "");
void write_dataset_csv(const std::string& path, const RepeatedDataset& data, const std::string& manifest = "");

struct DatasetFile {
    RepeatedDataset data;
    std::string manifest;  // manifest line without the leading "# "
};
DatasetFile read_dataset_csv(std::istream& is);
DatasetFile read_dataset_csv(const std::string& path);

enum class ResponseTransform { identity, log };
enum class Rescale { none, minmax_to_unit_cube };
enum class ScalingRange { source, joint };

struct PreprocessSpec {
    std::string response_col;
    ResponseTransform response_transform = ResponseTransform::identity;
    std::vector<std::string> log1p_cols;
    std::optional<std::size_t> hours_retained;
    bool drop_missing_rows = true;
    bool drop_missing_subjects_in_target = true;
    Rescale rescale = Rescale::minmax_to_unit_cube;
    ScalingRange scaling_range = ScalingRange::source;
};

/// Per-column affine map onto [0, 1]. Constant columns map to 0.
struct MinMaxScaler {
    std::vector<std::string> names;
    Eigen::VectorXd min;
    Eigen::VectorXd max;

    double apply(Eigen::Index col, double v) const;
    /// Maps every subject's covariates; values outside [0, 1] are clamped
    /// and counted in *clamped when given.
    RepeatedDataset transform(const RepeatedDataset& data, std::size_t* clamped = nullptr) const;

    void save(std::ostream& os) const;
    void save(const std::string& path) const;
    static MinMaxScaler load(std::istream& is);
    static MinMaxScaler load(const std::string& path);
};

struct PreprocessResult {
    Panel source;
    Panel target;
    std::optional<MinMaxScaler> scaler;
    std::size_t target_clamped = 0;   // clamped target coordinates
    double target_clamped_fraction = 0.0;
    std::size_t dropped_rows = 0;
    std::size_t dropped_subjects = 0;
};

/// Cleans a source/target pair: keeps the first hours_retained rows per
/// subject, drops target subjects with any missing value, drops rows with
/// missing values, applies the response and log1p transforms, then min-max
/// rescales covariates with ranges fitted on the source (or both domains
/// under ScalingRange::joint). Throws PreprocessError when a column is
/// entirely missing or a transform leaves the real line, SchemaError for
/// unknown columns.
PreprocessResult preprocess(const Panel& source, const Panel& target, const PreprocessSpec& spec);
/// Single-panel form: the panel is treated as the source domain.
Panel preprocess(const Panel& data, const PreprocessSpec& spec, std::optional<MinMaxScaler>* scaler = nullptr);

struct BinStat {
    double mean_true = 0.0;
    double mse = 0.0;
    std::size_t count = 0;
};

/// Sorts samples by true value (stable) and cuts them into `bins`
/// contiguous groups whose sizes differ by at most one.
std::vector<BinStat> binned_mse(const Eigen::VectorXd& true_y, const Eigen::VectorXd& pred_y, std::size_t bins = 10);

void write_binned_csv(std::ostream& os, const std::vector<BinStat>& bins);

/// Splits one CSV line; supports double-quoted fields.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace repshift
