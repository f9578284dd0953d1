#pragma once

// Toy network families and their block-subgraph catalogs.
//
// toy-dit mirrors a DiT/PixArt denoiser: timestep and caption embeddings, a
// patchify layer, transformer blocks (self-attention, cross-attention split
// into a query/key part and a value/output part, feedforward) and an output
// projection. toy-unet mirrors a UNet denoiser: residual blocks with and
// without skip projections, transformer blocks at the lower levels, and
// up-sampling layers. Each catalog entry is rooted at the last layer of its
// block; the catalog partitions the weight nodes.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mixq/graph/net_graph.hpp"

namespace mixq::graph {

struct SubgraphSpec {
  std::string category;
  std::size_t root = 0;
  int hop = 0;
  std::vector<std::size_t> members;         // sorted node indices, includes root
  std::vector<std::size_t> weight_members;  // sorted, subset of members
};

struct FamilyParams {
  int blocks = 2;           // transformer blocks (toy-dit) or levels (toy-unet)
  std::size_t width = 32;   // hidden width
};

struct BuiltGraph {
  NetGraph graph;
  std::vector<SubgraphSpec> catalog;
  FamilyParams params;
  std::uint64_t seed = 0;
};

const std::vector<std::string>& known_families();

// Builds a finalized graph and its catalog. The structure depends only on
// the family and params; the seed is carried along for weight generation.
BuiltGraph build_graph(std::string_view family, const FamilyParams& params, std::uint64_t seed = 0);

// Throws DataError unless every entry is consistent with the graph (root in
// members, members within the root's hop neighborhood, weight members exact)
// and the entries partition the weight nodes.
void validate_catalog(const NetGraph& g, const std::vector<SubgraphSpec>& catalog);

// Sorted distinct hop levels used by the catalog.
std::vector<int> catalog_hops(const std::vector<SubgraphSpec>& catalog);

}  // namespace mixq::graph
