#ifndef GNNEAR_MODEL_H_
#define GNNEAR_MODEL_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gnnear/bf16.h"
#include "gnnear/graph.h"

namespace gnnear {

enum class Variant : uint8_t { kGcn, kGin, kSage, kGat };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);  // ParamError on unknown

struct LayerDims {
  uint32_t d_in = 0;
  uint32_t d_out = 0;
};

struct ModelConfig {
  Variant variant = Variant::kGcn;
  std::vector<LayerDims> dims;
  Precision precision = Precision::kFp32;
  double learning_rate = 0.01;
  double gin_eps = 0.1;
  double gat_slope = 0.2;

  uint32_t num_layers() const { return static_cast<uint32_t>(dims.size()); }
  uint32_t element_bytes() const { return gnnear::element_bytes(precision); }
  // Linear aggregators allow running combination before aggregation.
  bool linear_aggregator() const { return variant != Variant::kGat; }
  void validate() const;  // ConfigError
};

ModelConfig make_model(Variant v, std::vector<uint32_t> widths,
                       Precision p = Precision::kFp32);

struct Matrix {
  uint32_t rows = 0;
  uint32_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(uint32_t r, uint32_t c) : rows(r), cols(c), data(std::size_t{r} * c) {}

  float& at(uint32_t r, uint32_t c) { return data[std::size_t{r} * cols + c]; }
  float at(uint32_t r, uint32_t c) const {
    return data[std::size_t{r} * cols + c];
  }
  std::span<float> row(uint32_t r) {
    return {data.data() + std::size_t{r} * cols, cols};
  }
  std::span<const float> row(uint32_t r) const {
    return {data.data() + std::size_t{r} * cols, cols};
  }
  bool empty() const { return data.empty(); }
  bool operator==(const Matrix&) const = default;
};

// Parameters of one layer. GCN/SAGEConv use w. GIN uses w, b1, w2, b2.
// GAT uses w plus the attention projections att_w1, att_w2 and att_a.
struct LayerParams {
  Matrix w;
  Matrix w2;
  std::vector<float> b1;
  std::vector<float> b2;
  Matrix att_w1;
  Matrix att_w2;
  std::vector<float> att_a;
  bool operator==(const LayerParams&) const = default;
};

struct TrainerState {
  std::vector<LayerParams> weights;
  std::vector<LayerParams> grads;  // same shapes, zero at epoch start
  double loss = 0.0;
};

TrainerState init_state(const ModelConfig& cfg, uint64_t seed);
void zero_grads(TrainerState& s);
void sgd_step(TrainerState& s, double lr);

// Aggregation weights over closed neighborhoods, aligned with a graph's
// rows: self_w[v] for v itself and nbr_w[e] for col_idx[e].
struct EdgeWeights {
  std::vector<double> self_w;
  std::vector<double> nbr_w;
};

EdgeWeights forward_edge_weights(const CsrGraph& g, const ModelConfig& cfg,
                                 const LayerParams& p, const Matrix& h);
// Weights over the transposed graph gt: edge (v -> u) carries the forward
// weight of (u -> v).
EdgeWeights transpose_edge_weights(const CsrGraph& g, const CsrGraph& gt,
                                   const EdgeWeights& fwd);
Matrix aggregate(const CsrGraph& g, const EdgeWeights& w, const Matrix& x,
                 Precision p);

struct FeatureStore {
  std::vector<Matrix> h;        // L+1 hidden features, h[0] is the input
  std::vector<Matrix> a;        // aggregation results
  std::vector<Matrix> z;        // pre-activation outputs
  std::vector<Matrix> t;        // GIN hidden activations
  std::vector<Matrix> delta;    // dL/da
  std::vector<Matrix> delta_p;  // masked gradients at the layer product
  std::vector<Matrix> grad_h;   // dL/dh, index 1..L
  std::vector<EdgeWeights> edge_w;
};

FeatureStore forward_reference(const CsrGraph& g, const ModelConfig& cfg,
                               const TrainerState& s, const Matrix& x);

// Softmax cross-entropy averaged over vertices. Returns the loss and
// writes dL/dlogits.
double softmax_xent(const Matrix& logits, std::span<const uint32_t> labels,
                    Matrix* grad, Precision p);

void backward_reference(const CsrGraph& g, const ModelConfig& cfg,
                        TrainerState& s, FeatureStore& fs,
                        const Matrix& output_grad);

// Forward, loss, backward. Leaves gradients in s.grads.
FeatureStore train_epoch_reference(const CsrGraph& g, const ModelConfig& cfg,
                                   TrainerState& s, const Matrix& x,
                                   std::span<const uint32_t> labels);

Matrix random_features(uint32_t n, uint32_t d, uint64_t seed);
std::vector<uint32_t> random_labels(uint32_t n, uint32_t classes,
                                    uint64_t seed);

// Flat matrix file: rows u64, cols u64, element code u32, data.
enum class ElementCode : uint32_t { kF32 = 0, kBf16 = 1, kU32 = 2 };
void write_matrix(std::ostream& out, const Matrix& m,
                  ElementCode code = ElementCode::kF32);
Matrix read_matrix(std::istream& in);
void write_labels(std::ostream& out, std::span<const uint32_t> labels);
std::vector<uint32_t> read_labels(std::istream& in);

// ---- Epoch program --------------------------------------------------------

enum class Direction : uint8_t { kForward, kBackward };

enum class OpKind : uint8_t {
  kAggregate,     // Reduce over the layer's source matrix
  kProject,       // interchanged order: p = h W before aggregation
  kUpdateFwd,     // a -> h via weights and activation
  kActivateFwd,   // interchanged order: aggregated p -> h
  kLoss,
  kHeadBwd,       // activation mask (GIN: second MLP layer and inner mask)
  kUpdateBwd,     // dW += a^T d', d = d' W^T
  kUpdateBwdIeo,  // dW += h^T G, dh = G W^T
};

struct EpochOp {
  OpKind kind;
  uint32_t layer;
  Direction dir;
  uint32_t dim = 0;  // vector width for aggregations
};

// True when layer l runs combination before aggregation.
bool ieo_applies(const ModelConfig& cfg, uint32_t layer, bool ieo);
std::vector<EpochOp> plan_epoch(const ModelConfig& cfg, bool ieo);

enum class UpdateKind : uint8_t { kVecMat, kOuterProduct };
enum class OthersKind : uint8_t { kLoss, kActivation };

struct VertexRange {
  uint32_t begin = 0;
  uint32_t end = 0;
};

struct ReduceStep {
  uint32_t layer;
  Direction dir;
  uint32_t interval;
  VertexRange dest;
  uint32_t dim;
  std::vector<Edge> edges;  // (source, destination)
};

struct UpdateStep {
  uint32_t layer;
  Direction dir;
  UpdateKind kind;
  VertexRange range;
};

struct OthersStep {
  OthersKind kind;
  VertexRange range;
};

using OpStep = std::variant<ReduceStep, UpdateStep, OthersStep>;

struct OpStream {
  std::vector<OpStep> steps;
};

struct Placement;
struct ShardConfig;

OpStream build_op_stream(const CsrGraph& g, const ModelConfig& cfg,
                         const Placement& placement, const ShardConfig& shard,
                         bool ieo);

struct OpCounts {
  std::vector<uint64_t> reduce_additions;  // per layer
  std::vector<uint64_t> vec_mat_updates;   // per layer, forward
  std::vector<uint64_t> outer_products;    // per layer, backward
};

OpCounts op_counts(const CsrGraph& g, const ModelConfig& cfg);

enum class IntensityKind : uint8_t { kVecMat, kOuterProduct, kReduce };

double arithmetic_intensity(IntensityKind kind, uint32_t d_in, uint32_t d_out,
                            double fanin, uint32_t element_bytes = 4);

}  // namespace gnnear

#endif  // GNNEAR_MODEL_H_
