#include "uavnet/netsim/routing.hpp"

#include <deque>

namespace uavnet::netsim {

std::optional<std::vector<int>> min_hop_route(const Adjacency& adj, int src, int dst) {
  if (src == dst) return std::vector<int>{src};
  // Hop distance of every node to dst.
  std::map<int, int> dist{{dst, 0}};
  std::deque<int> frontier{dst};
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop_front();
    auto it = adj.find(u);
    if (it == adj.end()) continue;
    for (int v : it->second) {
      if (dist.emplace(v, dist[u] + 1).second) frontier.push_back(v);
    }
  }
  if (!dist.count(src)) return std::nullopt;

  std::vector<int> path{src};
  int u = src;
  while (u != dst) {
    int best = 0;
    bool found = false;
    for (int v : adj.at(u)) {
      auto d = dist.find(v);
      if (d != dist.end() && d->second == dist[u] - 1 && (!found || v < best)) {
        best = v;
        found = true;
      }
    }
    u = best;
    path.push_back(u);
  }
  return path;
}

}  // namespace uavnet::netsim
