#pragma once

// Temporal hypergraph over the two modality streams of one event.
//
// Nodes: 2T, audio timesteps first (rows 0..T-1), then visual (rows T..2T-1).
// For each window start p in [0, T-w], four edge groups are built:
//   1 audio intra-window edge   {a_p..a_{p+w-1}}
//   1 visual intra-window edge  {v_p..v_{p+w-1}}
//   w audio-star edges          {a_c} + all visual nodes in the window
//   w visual-star edges         {v_c} + all audio nodes in the window
// giving (T-w+1)*(2+2w) edges. Edge weights are identity; propagation is
// the degree-normalized incidence product, symmetric with spectrum in [0,1].

#include <cstdint>
#include <string>
#include <vector>

#include "hgfusion/init.hpp"
#include "hgfusion/rng.hpp"
#include "hgfusion/tensor.hpp"

namespace hgf {

enum class EdgeKind { AudioIntra, VisualIntra, AudioStar, VisualStar };

inline const char* edge_kind_name(EdgeKind k) {
  switch (k) {
    case EdgeKind::AudioIntra: return "audio-intra";
    case EdgeKind::VisualIntra: return "visual-intra";
    case EdgeKind::AudioStar: return "audio-star";
    case EdgeKind::VisualStar: return "visual-star";
  }
  return "?";
}

struct HyperEdge {
  EdgeKind kind;
  int window_start;            // p
  int center;                  // node index of the star center, -1 for intra edges
  std::vector<int> nodes;      // ascending node indices
};

struct IncidenceStructure {
  int frames = 0;              // T
  int window = 0;              // w
  int edge_count = 0;          // E
  std::vector<HyperEdge> edges;
  std::vector<std::uint8_t> incidence;  // [2T x E], row-major
  std::vector<double> node_degree;      // [2T]
  std::vector<double> edge_degree;      // [E]

  int nodes() const { return 2 * frames; }

  bool incident(int node, int edge) const {
    return incidence[static_cast<std::size_t>(node) * edge_count + edge] != 0;
  }

  // G = Dv^{-1/2} H De^{-1} H^T Dv^{-1/2}, as a constant tensor [2T,2T].
  // Term grouping keeps G bitwise symmetric: (u,v) and (v,u) accumulate the
  // exact same product sequence.
  Tensor propagation() const {
    const int n = nodes();
    std::vector<double> inv_sqrt(n);
    for (int u = 0; u < n; ++u) inv_sqrt[u] = 1.0 / std::sqrt(node_degree[u]);
    Tensor g = Tensor::zeros({n, n});
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const double inv_de = 1.0 / edge_degree[i];
      for (int u : edges[i].nodes) {
        for (int v : edges[i].nodes) {
          g.at(u, v) += inv_de * (inv_sqrt[u] * inv_sqrt[v]);
        }
      }
    }
    return g;
  }

  // One line per edge: index, kind, window start, member nodes labeled
  // a<t> / v<t> by modality.
  std::string edge_list() const {
    std::string out;
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const HyperEdge& e = edges[i];
      out += std::to_string(i);
      out += "\t";
      out += edge_kind_name(e.kind);
      out += "\twindow=" + std::to_string(e.window_start) + "\tnodes=";
      for (std::size_t k = 0; k < e.nodes.size(); ++k) {
        if (k) out += " ";
        const int node = e.nodes[k];
        out += node < frames ? "a" + std::to_string(node) : "v" + std::to_string(node - frames);
      }
      out += "\n";
    }
    return out;
  }
};

inline IncidenceStructure build_incidence(int frames, int window) {
  if (frames < 1) throw std::invalid_argument("build_incidence: T must be >= 1");
  if (window < 1 || window > frames) {
    throw std::invalid_argument("build_incidence: window " + std::to_string(window) +
                                " outside [1, T=" + std::to_string(frames) + "]");
  }
  IncidenceStructure s;
  s.frames = frames;
  s.window = window;
  const int t = frames, w = window;
  const int starts = t - w + 1;
  s.edge_count = starts * (2 + 2 * w);
  s.edges.reserve(s.edge_count);

  auto audio_node = [](int tt) { return tt; };
  auto visual_node = [t](int tt) { return t + tt; };

  for (int p = 0; p < starts; ++p) {
    HyperEdge ai{EdgeKind::AudioIntra, p, -1, {}};
    HyperEdge vi{EdgeKind::VisualIntra, p, -1, {}};
    for (int k = 0; k < w; ++k) {
      ai.nodes.push_back(audio_node(p + k));
      vi.nodes.push_back(visual_node(p + k));
    }
    s.edges.push_back(std::move(ai));
    s.edges.push_back(std::move(vi));
    for (int c = 0; c < w; ++c) {
      // Audio-star: one audio center plus every visual node in the window.
      HyperEdge as{EdgeKind::AudioStar, p, audio_node(p + c), {}};
      as.nodes.push_back(audio_node(p + c));
      for (int k = 0; k < w; ++k) as.nodes.push_back(visual_node(p + k));
      s.edges.push_back(std::move(as));
      HyperEdge vs{EdgeKind::VisualStar, p, visual_node(p + c), {}};
      for (int k = 0; k < w; ++k) vs.nodes.push_back(audio_node(p + k));
      vs.nodes.push_back(visual_node(p + c));
      s.edges.push_back(std::move(vs));
    }
  }

  const int n = 2 * t;
  s.incidence.assign(static_cast<std::size_t>(n) * s.edge_count, 0);
  s.node_degree.assign(n, 0.0);
  s.edge_degree.assign(s.edge_count, 0.0);
  for (int e = 0; e < s.edge_count; ++e) {
    for (int u : s.edges[e].nodes) {
      s.incidence[static_cast<std::size_t>(u) * s.edge_count + e] = 1;
      s.node_degree[u] += 1.0;
    }
    s.edge_degree[e] = static_cast<double>(s.edges[e].nodes.size());
  }
  // Every node lies in at least the w intra/star edges of one window.
  for (int u = 0; u < n; ++u) {
    if (s.node_degree[u] <= 0.0) {
      throw std::logic_error("build_incidence: isolated node " + std::to_string(u));
    }
  }
  return s;
}

// Sinusoidal position table [T, dim]; dim must be even.
// pe[t,2i] = sin(t / 10000^(2i/dim)), pe[t,2i+1] = cos(t / 10000^(2i/dim)).
inline Tensor positional_encoding(int frames, int dim) {
  if (frames < 1) throw std::invalid_argument("positional_encoding: T must be >= 1");
  if (dim < 2 || dim % 2 != 0) {
    throw std::invalid_argument("positional_encoding: dim " + std::to_string(dim) +
                                " must be even and >= 2");
  }
  Tensor pe = Tensor::zeros({frames, dim});
  for (int t = 0; t < frames; ++t) {
    for (int i = 0; i < dim / 2; ++i) {
      const double rate = std::pow(10000.0, 2.0 * i / static_cast<double>(dim));
      pe.at(t, 2 * i) = std::sin(t / rate);
      pe.at(t, 2 * i + 1) = std::cos(t / rate);
    }
  }
  return pe;
}

// feat + position table (constant, no gradient into the table).
inline Tensor positional_encode(Tape& tape, const Tensor& feat) {
  if (feat.rank() != 2) {
    throw std::invalid_argument("positional_encode: expected [T,dim], got " +
                                detail::shape_str(feat.shape()));
  }
  return tape.add(feat, positional_encoding(feat.shape()[0], feat.shape()[1]));
}

enum class ConvActivation { Relu, Tanh, Identity };

inline ConvActivation parse_conv_activation(const std::string& name) {
  if (name == "relu") return ConvActivation::Relu;
  if (name == "tanh") return ConvActivation::Tanh;
  if (name == "identity") return ConvActivation::Identity;
  throw std::invalid_argument("conv_activation: unknown mode \"" + name + "\"");
}

// One propagation step: act(G x theta). G is the constant normalized
// propagation matrix of the incidence structure; theta is learned.
inline Tensor hypergraph_convolve(Tape& tape, const Tensor& x, const IncidenceStructure& inc,
                                  const Tensor& theta, ConvActivation act) {
  if (x.rank() != 2 || x.shape()[0] != inc.nodes()) {
    throw std::invalid_argument("hypergraph_convolve: expected [" + std::to_string(inc.nodes()) +
                                ",D] node features, got " + detail::shape_str(x.shape()));
  }
  if (theta.rank() != 2 || theta.shape()[0] != x.shape()[1]) {
    throw std::invalid_argument("hypergraph_convolve: theta shape " +
                                detail::shape_str(theta.shape()) + " does not accept features " +
                                detail::shape_str(x.shape()));
  }
  Tensor mixed = tape.matmul(inc.propagation(), tape.matmul(x, theta));
  switch (act) {
    case ConvActivation::Relu: return tape.relu(mixed);
    case ConvActivation::Tanh: return tape.tanh(mixed);
    case ConvActivation::Identity: return mixed;
  }
  throw std::logic_error("hypergraph_convolve: unreachable");
}

// Stack of propagation steps sharing one incidence structure. The first
// layer maps d_in -> d_out, deeper layers d_out -> d_out.
struct HypergraphConv {
  std::vector<Tensor> thetas;
  ConvActivation act = ConvActivation::Relu;

  HypergraphConv() = default;

  HypergraphConv(int d_in, int d_out, int depth, ConvActivation act_, Rng& rng) : act(act_) {
    if (depth < 1) throw std::invalid_argument("HypergraphConv: depth must be >= 1");
    int cur = d_in;
    for (int l = 0; l < depth; ++l) {
      Tensor th = Tensor::zeros({cur, d_out}, true);
      fill_uniform(th, rng, uniform_bound(cur, act == ConvActivation::Relu));
      thetas.push_back(th);
      cur = d_out;
    }
  }

  Tensor forward(Tape& tape, const Tensor& x, const IncidenceStructure& inc) const {
    Tensor cur = x;
    for (const Tensor& th : thetas) cur = hypergraph_convolve(tape, cur, inc, th, act);
    return cur;
  }
};

}  // namespace hgf
