#pragma once

#include <string>
#include <utility>
#include <vector>

#include "idu/ingest.hpp"
#include "idu/tensor.hpp"

namespace idu::prep {

enum class ColumnAction { one_hot, standardize, drop };

struct EncoderColumn {
    std::string name;
    ColumnAction action = ColumnAction::drop;
    std::vector<std::string> vocab;  // one_hot; sorted lexicographically
    double mean = 0.0;
    double std_dev = 1.0;  // floored at 1e-8
};

/// Per-column encoding plan fitted on the training split only. Vocabularies
/// and statistics are frozen before validation/test data is transformed.
struct EncoderSpec {
    bool fitted = false;
    std::vector<EncoderColumn> columns;  // parallel to the schema columns
    std::vector<std::string> class_names;

    int output_width() const;
    std::vector<std::string> output_names() const;
    int class_index(const std::string& name) const;  // -1 when unknown

    std::string serialize() const;
    static EncoderSpec deserialize(const std::string& text);
    /// Leading `# config=<digest>` comment lines are outside the payload and
    /// do not affect the spec digest.
    void save(const std::string& path, const std::string& config_digest = "") const;
    static EncoderSpec load(const std::string& path);
    std::string digest() const;
};

struct Provenance {
    std::string source_path;
    std::string source_digest;
    std::string encoder_digest;
    std::string config_digest;
    std::string feature_digest;  // selected-feature manifest, once projected
    std::string task = "class";
    std::string schema;
    uint64_t seed = 0;
};

struct EncodedDataset {
    core::Tensor X;           // N x d
    core::Tensor Y;           // N x C, one-hot
    std::vector<int> labels;  // class index per row
    std::vector<std::string> column_names;
    std::vector<std::string> class_names;
    Provenance provenance;

    long rows() const { return X.dims.empty() ? 0 : X.dims[0]; }
    int width() const { return X.dims.size() < 2 ? 0 : X.dims[1]; }
    int n_classes() const { return static_cast<int>(class_names.size()); }
    std::vector<long> class_counts() const;
};

struct FitResult {
    EncoderSpec spec;
    std::vector<std::string> warnings;
};

/// Fits vocabularies (sorted lexicographically) and per-column statistics
/// (64-bit accumulation, std floor 1e-8). Cells that do not parse as finite
/// numbers count as missing; an all-missing numeric column is dropped with a
/// warning. `row_labels` carries the mapped class (or role) name per record.
FitResult fit_encoder(const std::vector<ingest::FlowRecord>& records,
                      const ingest::DatasetSchema& schema, const std::vector<std::string>& row_labels);

/// Deterministic transform; unseen categories encode as all-zeros blocks,
/// missing numerics as 0 (the standardized mean). Never mutates the spec.
EncodedDataset transform(const std::vector<ingest::FlowRecord>& records,
                         const std::vector<std::string>& row_labels, const EncoderSpec& spec);

/// Index-level split shared by the dataset op and the raw-record pipeline
/// (the pipeline splits before fitting the encoder so vocabularies and
/// statistics never see test rows).
std::pair<std::vector<long>, std::vector<long>> split_indices(
    const std::vector<int>& labels, const std::vector<std::string>& class_names, double ratio,
    bool stratified, uint64_t seed, std::vector<std::string>* warnings = nullptr);

/// Stratified split preserves each class count within +-1 sample; a
/// single-sample class goes to train with a warning.
std::pair<EncodedDataset, EncodedDataset> split(const EncodedDataset& ds, double ratio, bool stratified,
                                               uint64_t seed, std::vector<std::string>* warnings = nullptr);

/// Stratified subsample of `fraction` of the rows (used by the scalability
/// protocol); errors if any class would end up empty.
EncodedDataset stratified_fraction(const EncodedDataset& ds, double fraction, uint64_t seed);

/// Row subset in index order.
EncodedDataset take_rows(const EncodedDataset& ds, const std::vector<long>& idx);

/// Random oversampling with replacement: every class is raised to at least
/// floor_fraction * majority count; synthesized rows are exact copies.
EncodedDataset resample(const EncodedDataset& train, double floor_fraction, uint64_t seed);

/// Binary dataset files (magic IDUE, version 1): metadata JSON + f32 matrix +
/// label indices. Byte-deterministic for identical inputs.
void save_dataset(const std::string& path, const EncodedDataset& ds);
EncodedDataset load_dataset_file(const std::string& path);

}  // namespace idu::prep
