#pragma once

// Directed acyclic graph of network operations. Nodes are either weight
// layers (quantizable) or passthrough ops such as residual adds and the
// attention matmuls. Edges point from producer to consumer.

#include <boost/multiprecision/cpp_int.hpp>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mixq::graph {

enum class NodeKind : std::uint8_t { Weight, Passthrough };

// What the toy oracle computes at a node. Weight nodes are always Linear.
enum class Compute : std::uint8_t {
  Input,       // external tensor
  Linear,      // (sum of inputs, optional ReLU) * W^T
  Add,         // sum of inputs, broadcasting single-row inputs
  AttnScores,  // softmax(Q K^T / sqrt(d)); inputs (Q, K)
  AttnApply,   // S V; inputs (S, V)
  Norm,        // layer-norm of input 0 plus the remaining inputs
};

std::string_view to_string(NodeKind k);
std::string_view to_string(Compute c);
NodeKind parse_node_kind(std::string_view s);
Compute parse_compute(std::string_view s);

// Fixed op-type vocabulary shared by all families; the surrogate embeds the
// index. Unknown labels are rejected.
const std::vector<std::string>& op_type_vocabulary();
int op_type_code(std::string_view label);

struct OpNode {
  std::string id;
  NodeKind kind = NodeKind::Passthrough;
  Compute compute = Compute::Add;
  std::string op_type;
  int block_index = 0;
  // Output feature width. For weight nodes the tensor is [out_dim, in_dim]
  // with in_dim the (shared) width of the inputs.
  std::size_t out_dim = 0;
  bool relu_input = false;
  std::string weight_ref;  // non-empty iff kind == Weight

  bool is_weight() const { return kind == NodeKind::Weight; }
};

class NetGraph {
 public:
  NetGraph() = default;
  explicit NetGraph(std::string family) : family_(std::move(family)) {}

  std::size_t add_node(OpNode node);
  void add_edge(std::size_t src, std::size_t dst);
  void add_edge(std::string_view src, std::string_view dst);

  // Checks invariants (endpoints, weight refs, acyclicity) and builds the
  // adjacency and topological order. Must be called before queries.
  void finalize();
  bool finalized() const { return finalized_; }

  const std::string& family() const { return family_; }
  std::size_t size() const { return nodes_.size(); }
  const OpNode& node(std::size_t i) const { return nodes_.at(i); }
  const std::vector<OpNode>& nodes() const { return nodes_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }
  // Predecessors in insertion order of the edges (the order matters for
  // AttnScores/AttnApply/Norm inputs).
  const std::vector<std::size_t>& preds(std::size_t i) const { return preds_.at(i); }
  const std::vector<std::size_t>& succs(std::size_t i) const { return succs_.at(i); }
  const std::vector<std::size_t>& topo_order() const { return topo_; }
  // Weight nodes in node-index order; position in this list is the weight slot.
  const std::vector<std::size_t>& weight_nodes() const { return weight_nodes_; }
  // Slot of a weight node, or -1.
  int weight_slot(std::size_t node) const { return slot_.at(node); }
  std::size_t index_of(std::string_view id) const;
  bool contains(std::string_view id) const;
  // Width of a node's inputs (equal across inputs by construction).
  std::size_t in_dim(std::size_t i) const;

 private:
  void require_finalized() const;

  std::string family_;
  std::vector<OpNode> nodes_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::vector<std::vector<std::size_t>> preds_, succs_;
  std::vector<std::size_t> topo_;
  std::vector<std::size_t> weight_nodes_;
  std::vector<int> slot_;
  bool finalized_ = false;
};

// N^m(v): nodes whose shortest directed path into v has length <= m,
// including v. Returned sorted by node index.
std::vector<std::size_t> m_hop_neighborhood(const NetGraph& g, std::size_t v, int m);

// 6^{#W}.
boost::multiprecision::cpp_int search_space_size(const NetGraph& g);
boost::multiprecision::cpp_int search_space_size(std::size_t weight_nodes);

}  // namespace mixq::graph
