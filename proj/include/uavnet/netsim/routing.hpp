#pragma once

#include <map>
#include <optional>
#include <vector>

namespace uavnet::netsim {

using Adjacency = std::map<int, std::vector<int>>;

/// Minimum-hop path from src to dst, both included. Among equal-length
/// paths the smallest next-hop id wins at every step. nullopt when dst is
/// unreachable.
std::optional<std::vector<int>> min_hop_route(const Adjacency& adj, int src, int dst);

}  // namespace uavnet::netsim
