#pragma once

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gnnhls/activation.hpp"
#include "gnnhls/error.hpp"
#include "gnnhls/graph.hpp"
#include "gnnhls/params.hpp"
#include "gnnhls/pipeline.hpp"
#include "gnnhls/reference.hpp"
#include "gnnhls/tensor.hpp"

// Functional execution of a PipelineSpec: every stage is a small state
// machine that pops items from its input FIFOs, computes, and pushes one item
// to each output FIFO per job. Two schedulers drive the same machines: one
// thread per stage with blocking queues, or a single-threaded round robin.

namespace gnnhls {

enum class Scheduler { threaded, round_robin };

struct StreamOptions {
  Scheduler scheduler = Scheduler::threaded;
  std::optional<std::uint64_t> capacity;  // overrides every FIFO of the pipeline
};

namespace stream {

using Item = std::vector<float>;

struct Channel {
  std::string from, to;
  std::uint64_t capacity = kDefaultFifoCapacity;
  std::deque<Item> items;
  std::uint64_t pushed = 0, popped = 0;

  bool full() const { return capacity != kUnbounded && items.size() >= capacity; }
};

struct Port {
  std::size_t channel;
  bool gather;
};

struct Behavior {
  std::function<void(std::size_t job)> begin = [](std::size_t) {};
  std::function<void(std::size_t port, Item&&)> absorb = [](std::size_t, Item&&) {};
  // Fills one item per output slot.
  std::function<void(std::size_t job, std::vector<Item>& outs)> finish;
};

struct Stage {
  std::string id;
  std::size_t jobs = 0;
  std::function<std::size_t(std::size_t job)> gather_count = [](std::size_t) { return 0; };
  std::vector<Port> in;
  std::vector<std::size_t> out;
  Behavior body;

  enum class Phase { start, collect, emit };
  std::size_t job = 0;
  Phase phase = Phase::start;
  std::vector<std::size_t> taken;
  std::vector<Item> pending;
  std::vector<bool> sent;

  bool done() const { return job == jobs; }
};

struct Net {
  std::vector<Channel> channels;
  std::vector<Stage> stages;

  Stage& stage(std::string_view id) {
    for (auto& s : stages)
      if (s.id == id) return s;
    throw Error("pipeline has no stage '" + std::string(id) + "'");
  }
  std::size_t in_port(const Stage& s, std::string_view from) const {
    for (std::size_t p = 0; p < s.in.size(); ++p)
      if (channels[s.in[p].channel].from == from) return p;
    throw Error("stage '" + s.id + "' has no input from '" + std::string(from) + "'");
  }
  std::size_t out_slot(const Stage& s, std::string_view to) const {
    for (std::size_t o = 0; o < s.out.size(); ++o)
      if (channels[s.out[o]].to == to) return o;
    throw Error("stage '" + s.id + "' has no output to '" + std::string(to) + "'");
  }

  std::string describe() const {
    std::string d;
    for (const auto& s : stages)
      if (!s.done())
        d += "\n  stage " + s.id + ": job " + std::to_string(s.job) + "/" +
             std::to_string(s.jobs) +
             (s.phase == Stage::Phase::emit ? " (waiting to emit)" : " (waiting for input)");
    for (const auto& c : channels)
      d += "\n  fifo " + c.from + "->" + c.to + ": " + std::to_string(c.items.size()) +
           " queued, " + std::to_string(c.pushed) + " pushed, " + std::to_string(c.popped) +
           " popped";
    return d;
  }
};

// Runs as far as the FIFOs allow. `compute` wraps the lock-free part (absorb
// and finish); FIFO access happens outside it. Returns whether any shared
// state changed.
template <class Compute>
bool step(Net& net, Stage& s, Compute&& compute) {
  bool progress = false;
  while (!s.done()) {
    if (s.phase == Stage::Phase::start) {
      s.taken.assign(s.in.size(), 0);
      s.body.begin(s.job);
      s.phase = Stage::Phase::collect;
    }
    if (s.phase == Stage::Phase::collect) {
      std::vector<std::pair<std::size_t, Item>> got;
      bool complete = true;
      const std::size_t gathered = s.gather_count(s.job);
      for (std::size_t p = 0; p < s.in.size(); ++p) {
        auto& ch = net.channels[s.in[p].channel];
        const std::size_t need = s.in[p].gather ? gathered : 1;
        while (s.taken[p] < need && !ch.items.empty()) {
          got.emplace_back(p, std::move(ch.items.front()));
          ch.items.pop_front();
          ++ch.popped;
          ++s.taken[p];
          progress = true;
        }
        complete &= s.taken[p] == need;
      }
      if (got.empty() && !complete) return progress;
      compute([&] {
        for (auto& [p, item] : got) s.body.absorb(p, std::move(item));
        if (complete) {
          s.pending.assign(s.out.size(), Item{});
          s.body.finish(s.job, s.pending);
        }
      });
      if (!complete) return progress;
      s.sent.assign(s.out.size(), false);
      s.phase = Stage::Phase::emit;
    }
    bool all_sent = true;
    for (std::size_t o = 0; o < s.out.size(); ++o) {
      if (s.sent[o]) continue;
      auto& ch = net.channels[s.out[o]];
      if (ch.full()) {
        all_sent = false;
        continue;
      }
      ch.items.push_back(std::move(s.pending[o]));
      ++ch.pushed;
      s.sent[o] = true;
      progress = true;
    }
    if (!all_sent) return progress;
    ++s.job;
    s.phase = Stage::Phase::start;
    progress = true;
  }
  return progress;
}

inline void check_drained(const Net& net) {
  for (const auto& c : net.channels)
    if (!c.items.empty())
      throw DataflowError("FIFO " + c.from + "->" + c.to + " still holds " +
                          std::to_string(c.items.size()) +
                          " item(s) after every stage finished (producer/consumer count "
                          "mismatch)" + net.describe());
}

inline void run_round_robin(Net& net) {
  auto inline_compute = [](auto&& fn) { fn(); };
  for (;;) {
    bool all_done = true, progress = false;
    for (auto& s : net.stages) {
      if (s.done()) continue;
      progress |= step(net, s, inline_compute);
      all_done &= s.done();
    }
    if (all_done) break;
    if (!progress)
      throw DataflowError("streaming pipeline cannot make progress:" + net.describe());
  }
  check_drained(net);
}

// One thread per stage. A thread that cannot move waits for the shared state
// to change; when every live thread has failed against the same state the
// run is a deadlock and is aborted instead of hanging.
inline void run_threaded(Net& net) {
  std::mutex mu;
  std::condition_variable cv;
  std::uint64_t epoch = 0;
  std::size_t blocked = 0, live = net.stages.size();
  bool abort = false;
  std::string why;
  std::exception_ptr failure;

  auto changed = [&] {
    ++epoch;
    blocked = 0;
    cv.notify_all();
  };
  auto worker = [&](Stage& s) {
    std::unique_lock lk(mu);
    auto unlocked = [&](auto&& fn) {
      lk.unlock();
      try {
        fn();
      } catch (...) {
        lk.lock();
        throw;
      }
      lk.lock();
    };
    while (!abort) {
      if (s.done()) {
        --live;
        changed();
        return;
      }
      bool progress = false;
      try {
        progress = step(net, s, unlocked);
      } catch (...) {
        failure = std::current_exception();
        abort = true;
        cv.notify_all();
        return;
      }
      if (progress) {
        changed();
        continue;
      }
      if (++blocked == live) {
        why = "streaming pipeline deadlocked:" + net.describe();
        abort = true;
        cv.notify_all();
        return;
      }
      const auto seen = epoch;
      cv.wait(lk, [&] { return abort || epoch != seen; });
    }
  };
  {
    std::vector<std::jthread> threads;
    threads.reserve(net.stages.size());
    for (auto& s : net.stages) threads.emplace_back(worker, std::ref(s));
  }
  if (failure) std::rethrow_exception(failure);
  if (abort) throw DataflowError(why);
  check_drained(net);
}

inline void run(Net& net, Scheduler sched) {
  if (sched == Scheduler::threaded)
    run_threaded(net);
  else
    run_round_robin(net);
}

// ---- model stage behaviors ---------------------------------------------

struct Context {
  const CsrGraph& g;
  const FeatureMatrix& H;
  const EdgeFeatures& E;
  NodeRange range;
  EdgeIndex e0 = 0, e1 = 0;
  LayerOutput& out;
  ref::GatIntermediate* mid = nullptr;
  const std::vector<PseudoCoord>* pseudo = nullptr;

  NodeId node(std::size_t job) const { return static_cast<NodeId>(range.start + job); }
  EdgeIndex edge(std::size_t job) const { return e0 + job; }
  NodeId neighbor(std::size_t job) const { return g.col_indices()[edge(job)]; }
  EdgeIndex row_begin(std::size_t job) const { return g.row_offsets()[node(job)]; }
};

// Target row of consecutive edge jobs; jobs are visited in order.
struct RowCursor {
  const CsrGraph* g;
  NodeId row;
  NodeId at(EdgeIndex q) {
    const auto off = g->row_offsets();
    while (off[row + 1] <= q) ++row;
    return row;
  }
};

inline Item to_item(std::span<const float> v) { return Item(v.begin(), v.end()); }

inline Item to_item(const std::vector<double>& v) {
  Item r(v.size());
  std::transform(v.begin(), v.end(), r.begin(), [](double x) { return static_cast<float>(x); });
  return r;
}

inline void broadcast(std::vector<Item>& outs, Item item) {
  if (outs.empty()) return;
  for (std::size_t o = 1; o < outs.size(); ++o) outs[o] = item;
  outs[0] = std::move(item);
}

// No inputs; one item per job.
inline Behavior source(std::function<Item(std::size_t)> make) {
  Behavior b;
  b.finish = [make = std::move(make)](std::size_t job, std::vector<Item>& outs) {
    broadcast(outs, make(job));
  };
  return b;
}

// One item in, one item out.
inline Behavior map(std::function<Item(std::size_t, Item&)> fn) {
  auto held = std::make_shared<Item>();
  Behavior b;
  b.absorb = [held](std::size_t, Item&& it) { *held = std::move(it); };
  b.finish = [held, fn = std::move(fn)](std::size_t job, std::vector<Item>& outs) {
    broadcast(outs, fn(job, *held));
  };
  return b;
}

// Collects one item per port (same granularity inputs only).
inline Behavior join(std::size_t ports,
                     std::function<void(std::size_t, std::vector<Item>&, std::vector<Item>&)> fn) {
  auto held = std::make_shared<std::vector<Item>>(ports);
  Behavior b;
  b.absorb = [held](std::size_t p, Item&& it) { (*held)[p] = std::move(it); };
  b.finish = [held, fn = std::move(fn)](std::size_t job, std::vector<Item>& outs) {
    fn(job, *held, outs);
  };
  return b;
}

// Buffers every item per port in arrival order; each port's items arrive in
// FIFO order, so the result does not depend on scheduling.
inline Behavior collect(std::size_t ports,
                        std::function<void(std::size_t, std::vector<std::vector<Item>>&,
                                           std::vector<Item>&)> fn) {
  auto held = std::make_shared<std::vector<std::vector<Item>>>(ports);
  Behavior b;
  b.begin = [held](std::size_t) {
    for (auto& v : *held) v.clear();
  };
  b.absorb = [held](std::size_t p, Item&& it) { (*held)[p].push_back(std::move(it)); };
  b.finish = [held, fn = std::move(fn)](std::size_t job, std::vector<Item>& outs) {
    fn(job, *held, outs);
  };
  return b;
}

// Running elementwise sum of gathered items.
inline Behavior sum_gather(std::size_t width,
                           std::function<Item(std::size_t, std::vector<double>&)> post) {
  auto acc = std::make_shared<std::vector<double>>(width);
  Behavior b;
  b.begin = [acc](std::size_t) { std::fill(acc->begin(), acc->end(), 0.0); };
  b.absorb = [acc](std::size_t, Item&& it) {
    if (it.size() != acc->size()) throw DataflowError("gathered item has the wrong width");
    for (std::size_t c = 0; c < it.size(); ++c) (*acc)[c] += it[c];
  };
  b.finish = [acc, post = std::move(post)](std::size_t job, std::vector<Item>& outs) {
    broadcast(outs, post(job, *acc));
  };
  return b;
}

inline Behavior sink(std::function<void(std::size_t, Item&)> store) {
  auto held = std::make_shared<Item>();
  Behavior b;
  b.absorb = [held](std::size_t, Item&& it) { *held = std::move(it); };
  b.finish = [held, store = std::move(store)](std::size_t job, std::vector<Item>&) {
    store(job, *held);
  };
  return b;
}

inline Item relu_item(Item v) {
  for (auto& x : v) x = relu(x);
  return v;
}

inline Item store_row(FeatureMatrix& M, NodeId i, const Item& v) {
  auto row = M.row(i);
  if (v.size() != row.size()) throw DataflowError("stored item has the wrong width");
  std::copy(v.begin(), v.end(), row.begin());
  return {};
}

inline Item features_of(const Context& c, std::size_t job, bool per_edge) {
  return to_item(c.H.row(per_edge ? c.neighbor(job) : c.node(job)));
}

inline void bind_gcn(Net& net, const Context& c, const GcnParams& p) {
  net.stage("read").body = source([&c](std::size_t q) { return features_of(c, q, true); });
  net.stage("aggregate").body =
      sum_gather(c.H.cols(), [](std::size_t, std::vector<double>& acc) { return to_item(acc); });
  net.stage("vmm").body = map([&p](std::size_t, Item& x) { return relu_item(vmm(x, p.U)); });
  net.stage("write").body =
      sink([&c](std::size_t j, Item& v) { store_row(c.out.output, c.node(j), v); });
}

inline void bind_sage(Net& net, const Context& c, const SageParams& p) {
  net.stage("read_target").body =
      source([&c](std::size_t j) { return features_of(c, j, false); });
  net.stage("vmm_target").body = map([&p](std::size_t, Item& x) { return vmm(x, p.V); });
  net.stage("read_neighbors").body =
      source([&c](std::size_t q) { return features_of(c, q, true); });
  net.stage("aggregate").body =
      sum_gather(c.H.cols(), [&c](std::size_t j, std::vector<double>& acc) {
        const auto deg = c.g.degree(c.node(j));
        if (deg)
          for (auto& x : acc) x /= static_cast<double>(deg);
        return to_item(acc);
      });
  net.stage("vmm_neighbor").body = map([&p](std::size_t, Item& x) { return vmm(x, p.W); });
  auto& sum = net.stage("sum");
  const auto a = net.in_port(sum, "vmm_target"), b = net.in_port(sum, "vmm_neighbor");
  sum.body = join(2, [a, b](std::size_t, std::vector<Item>& in, std::vector<Item>& outs) {
    Item r(in[a].size());
    for (std::size_t k = 0; k < r.size(); ++k)
      r[k] = relu(static_cast<float>(static_cast<double>(in[a][k]) + in[b][k]));
    broadcast(outs, std::move(r));
  });
  net.stage("write").body =
      sink([&c](std::size_t j, Item& v) { store_row(c.out.output, c.node(j), v); });
}

inline void bind_gin(Net& net, const Context& c, const GinParams& p) {
  net.stage("read_target").body =
      source([&c](std::size_t j) { return features_of(c, j, false); });
  net.stage("read_neighbors").body =
      source([&c](std::size_t q) { return features_of(c, q, true); });
  auto& agg = net.stage("aggregate");
  const auto self = net.in_port(agg, "read_target");
  // Neighbour sum and self term are kept apart so arrival order between the
  // two FIFOs cannot change the result.
  auto state = std::make_shared<std::pair<Item, std::vector<double>>>();
  agg.body.begin = [state, d = c.H.cols()](std::size_t) { state->second.assign(d, 0.0); };
  agg.body.absorb = [state, self](std::size_t port, Item&& it) {
    if (port == self) {
      state->first = std::move(it);
      return;
    }
    for (std::size_t k = 0; k < it.size(); ++k) state->second[k] += it[k];
  };
  agg.body.finish = [state, eps = p.eps](std::size_t, std::vector<Item>& outs) {
    std::vector<double> x(state->second.size());
    const double scale = 1.0 + static_cast<double>(eps);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = scale * state->first[k] + state->second[k];
    broadcast(outs, to_item(x));
  };
  net.stage("vmm_v").body = map([&p](std::size_t, Item& x) { return relu_item(vmm(x, p.V)); });
  net.stage("vmm_u").body = map([&p](std::size_t, Item& x) { return relu_item(vmm(x, p.U)); });
  net.stage("write").body =
      sink([&c](std::size_t j, Item& v) { store_row(c.out.output, c.node(j), v); });
}

inline void bind_gat_kernel1(Net& net, const Context& c, const GatParams& p) {
  const std::size_t K = p.heads(), dout = p.U[0].rows();
  net.stage("k1_read").body = source([&c](std::size_t j) { return features_of(c, j, false); });
  net.stage("k1_vmm").body = map([&p, K, dout](std::size_t, Item& h) {
    Item z(K * dout);
    for (std::size_t k = 0; k < K; ++k)
      vmm(h, p.U[k], std::span<float>(z).subspan(k * dout, dout));
    return z;
  });
  // z followed by el (K) and er (K).
  net.stage("k1_mhewm").body = map([&p, K, dout](std::size_t, Item& z) {
    Item r(z);
    r.resize(K * dout + 2 * K);
    for (std::size_t k = 0; k < K; ++k) {
      double sl = 0.0, sr = 0.0;
      for (std::size_t c = 0; c < dout; ++c) {
        sl += static_cast<double>(p.a_src(k, c)) * z[k * dout + c];
        sr += static_cast<double>(p.a_dest(k, c)) * z[k * dout + c];
      }
      r[K * dout + k] = static_cast<float>(sl);
      r[K * dout + K + k] = static_cast<float>(sr);
    }
    return r;
  });
  net.stage("k1_write").body = sink([&c, K, dout](std::size_t j, Item& v) {
    const NodeId i = c.node(j);
    std::copy_n(v.begin(), K * dout, c.mid->z.row(i).begin());
    for (std::size_t k = 0; k < K; ++k) {
      c.mid->el(i, k) = v[K * dout + k];
      c.mid->er(i, k) = v[K * dout + K + k];
    }
  });
}

inline void bind_gat_kernel2(Net& net, const Context& c, const GatParams& p) {
  const std::size_t K = p.heads(), dout = p.U[0].rows();
  const double slope = p.leaky_slope;
  // e_ij is produced twice, on two independent edge paths.
  for (const auto& [reader, scorer] : {std::pair{"read_scores_a", "eij_softmax"},
                                       std::pair{"read_scores_b", "eij_weight"}}) {
    auto cursor = std::make_shared<RowCursor>(RowCursor{&c.g, c.range.start});
    net.stage(reader).body = source([&c, cursor, K](std::size_t q) {
      const NodeId i = cursor->at(c.edge(q)), j = c.neighbor(q);
      Item r(2 * K);
      for (std::size_t k = 0; k < K; ++k) {
        r[k] = c.mid->el(i, k);
        r[K + k] = c.mid->er(j, k);
      }
      return r;
    });
    net.stage(scorer).body = map([K, slope](std::size_t, Item& s) {
      Item e(K);
      for (std::size_t k = 0; k < K; ++k)
        e[k] = static_cast<float>(leaky_relu(static_cast<double>(s[k]) + s[K + k], slope));
      return e;
    });
  }
  // Row maximum and sum of exp(e - max) per head.
  net.stage("softmax").body =
      collect(1, [K](std::size_t, std::vector<std::vector<Item>>& in, std::vector<Item>& outs) {
        Item r(2 * K, 0.0f);
        for (std::size_t k = 0; k < K && !in[0].empty(); ++k) {
          double mx = -std::numeric_limits<double>::infinity(), sum = 0.0;
          for (const auto& e : in[0]) mx = std::max(mx, static_cast<double>(e[k]));
          for (const auto& e : in[0]) sum += std::exp(static_cast<double>(e[k]) - mx);
          r[k] = static_cast<float>(mx);
          r[K + k] = static_cast<float>(sum);
        }
        broadcast(outs, std::move(r));
      });
  net.stage("read_features").body =
      source([&c](std::size_t q) { return to_item(c.mid->z.row(c.neighbor(q))); });
  auto& mh = net.stage("mhewm");
  const auto ps = net.in_port(mh, "softmax"), pe = net.in_port(mh, "eij_weight"),
             pz = net.in_port(mh, "read_features");
  // Batch item: alpha * z_j for every edge of the row, then alpha.
  mh.body = collect(3, [ps, pe, pz, K, dout](std::size_t, std::vector<std::vector<Item>>& in,
                                              std::vector<Item>& outs) {
    const auto& stats = in[ps].at(0);
    const std::size_t deg = in[pe].size();
    Item r(deg * K * dout + deg * K);
    for (std::size_t t = 0; t < deg; ++t)
      for (std::size_t k = 0; k < K; ++k) {
        const double a = std::exp(static_cast<double>(in[pe][t][k]) - stats[k]) / stats[K + k];
        r[deg * K * dout + t * K + k] = static_cast<float>(a);
        for (std::size_t col = 0; col < dout; ++col)
          r[(t * K + k) * dout + col] = static_cast<float>(a * in[pz][t][k * dout + col]);
      }
    broadcast(outs, std::move(r));
  });
  // Per-head sums, ELU; the alphas ride along to the writer.
  net.stage("aggregation").body = map([K, dout](std::size_t, Item& b) {
    const std::size_t deg = b.size() / (K * dout + K);
    std::vector<double> acc(K * dout, 0.0);
    for (std::size_t t = 0; t < deg; ++t)
      for (std::size_t x = 0; x < K * dout; ++x) acc[x] += b[t * K * dout + x];
    Item r(K * dout + deg * K);
    for (std::size_t x = 0; x < K * dout; ++x) r[x] = static_cast<float>(elu(acc[x]));
    std::copy(b.begin() + static_cast<std::ptrdiff_t>(deg * K * dout), b.end(),
              r.begin() + static_cast<std::ptrdiff_t>(K * dout));
    return r;
  });
  net.stage("write").body = sink([&c, K, dout](std::size_t j, Item& v) {
    const NodeId i = c.node(j);
    std::copy_n(v.begin(), K * dout, c.out.output.row(i).begin());
    const EdgeIndex b = c.row_begin(j);
    for (std::size_t t = 0; t < c.g.degree(i); ++t)
      for (std::size_t k = 0; k < K; ++k) c.out.attention(b + t, k) = v[K * dout + t * K + k];
  });
}

inline void bind_monet(Net& net, const Context& c, const MonetParams& p) {
  const std::size_t K = p.heads(), d = c.H.cols(), dout = p.U[0].rows();
  net.stage("read_pseudo").body = source([&c](std::size_t q) {
    const auto& pc = (*c.pseudo)[c.edge(q)];
    return Item{pc[0], pc[1]};
  });
  net.stage("vmm_pseudo").body = map([&p](std::size_t, Item& pc) {
    Item u(2);
    for (std::size_t r = 0; r < 2; ++r) {
      double s = 0.0;
      for (std::size_t col = 0; col < 2; ++col) s += static_cast<double>(p.V2(r, col)) * pc[col];
      u[r] = static_cast<float>(std::tanh(s + p.v2(0, r)));
    }
    return u;
  });
  net.stage("gaussian").body = map([&p, K](std::size_t, Item& u) {
    Item w(K);
    for (std::size_t k = 0; k < K; ++k) {
      double s = 0.0;
      for (std::size_t col = 0; col < 2; ++col) {
        const double diff = static_cast<double>(u[col]) - p.mu(k, col);
        s += p.sigma_inv(k, col) * (diff * diff);
      }
      w[k] = static_cast<float>(std::exp(-0.5 * s));
    }
    return w;
  });
  net.stage("read_neighbors").body =
      source([&c](std::size_t q) { return features_of(c, q, true); });
  auto& mh = net.stage("mhewm");
  const auto pw = net.in_port(mh, "gaussian"), ph = net.in_port(mh, "read_neighbors");
  mh.body = join(2, [pw, ph, K, d](std::size_t, std::vector<Item>& in, std::vector<Item>& outs) {
    Item r(K * d);
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t col = 0; col < d; ++col)
        r[k * d + col] = static_cast<float>(static_cast<double>(in[pw][k]) * in[ph][col]);
    broadcast(outs, std::move(r));
  });
  net.stage("mhvmm").body =
      sum_gather(K * d, [&p, K, d, dout](std::size_t, std::vector<double>& acc) {
        Item x = to_item(acc), y(K * dout);
        for (std::size_t k = 0; k < K; ++k)
          vmm(std::span<const float>(x).subspan(k * d, d), p.U[k],
              std::span<float>(y).subspan(k * dout, dout));
        return y;
      });
  net.stage("mh_aggregate").body = map([K, dout](std::size_t, Item& y) {
    std::vector<double> s(dout, 0.0);
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t r = 0; r < dout; ++r) s[r] += y[k * dout + r];
    return relu_item(to_item(s));
  });
  net.stage("write").body =
      sink([&c](std::size_t j, Item& v) { store_row(c.out.output, c.node(j), v); });
}

inline void bind_gatedgcn(Net& net, const Context& c, const GatedParams& p) {
  const std::size_t dout = p.A.rows();
  net.stage("read_target").body =
      source([&c](std::size_t j) { return features_of(c, j, false); });
  net.stage("vmm_a").body = map([&p](std::size_t, Item& x) { return vmm(x, p.A); });
  net.stage("vmm_e").body = map([&p](std::size_t, Item& x) { return vmm(x, p.E); });
  net.stage("read_neighbors").body =
      source([&c](std::size_t q) { return features_of(c, q, true); });
  net.stage("vmm_b").body = map([&p](std::size_t, Item& x) { return vmm(x, p.B); });
  net.stage("vmm_d").body = map([&p](std::size_t, Item& x) { return vmm(x, p.D); });
  net.stage("read_edge_features").body =
      source([&c](std::size_t q) { return to_item(c.E.row(c.edge(q))); });
  net.stage("vmm_c").body = map([&p](std::size_t, Item& x) { return vmm(x, p.C); });

  auto& sa = net.stage("soft_attention");
  const auto pe = net.in_port(sa, "vmm_e"), pb = net.in_port(sa, "vmm_b"),
             pd = net.in_port(sa, "vmm_d"), pc = net.in_port(sa, "vmm_c");
  const auto to_sum = net.out_slot(sa, "sum"), to_edges = net.out_slot(sa, "write_edges");
  sa.body = collect(4, [=, eps = static_cast<double>(p.eps_stab)](
                           std::size_t, std::vector<std::vector<Item>>& in,
                           std::vector<Item>& outs) {
    const auto& eh = in[pe].at(0);
    const std::size_t deg = in[pb].size();
    std::vector<double> num(dout, 0.0), den(dout, 0.0);
    Item edges(deg * dout);
    for (std::size_t t = 0; t < deg; ++t)
      for (std::size_t col = 0; col < dout; ++col) {
        const double ep = static_cast<double>(eh[col]) + in[pd][t][col] + in[pc][t][col];
        edges[t * dout + col] = static_cast<float>(ep);
        const double s = sigmoid(ep);
        num[col] += static_cast<double>(in[pb][t][col]) * s;
        den[col] += s;
      }
    for (std::size_t col = 0; col < dout; ++col) num[col] /= den[col] + eps;
    outs[to_sum] = to_item(num);
    outs[to_edges] = std::move(edges);
  });
  auto& sum = net.stage("sum");
  const auto pa = net.in_port(sum, "vmm_a"), pg = net.in_port(sum, "soft_attention");
  sum.body = join(2, [pa, pg](std::size_t, std::vector<Item>& in, std::vector<Item>& outs) {
    Item r(in[pa].size());
    for (std::size_t k = 0; k < r.size(); ++k)
      r[k] = relu(static_cast<float>(static_cast<double>(in[pa][k]) + in[pg][k]));
    broadcast(outs, std::move(r));
  });
  net.stage("write").body =
      sink([&c](std::size_t j, Item& v) { store_row(c.out.output, c.node(j), v); });
  net.stage("write_edges").body = sink([&c, dout](std::size_t j, Item& v) {
    const EdgeIndex b = c.row_begin(j);
    for (std::size_t t = 0; t < v.size() / dout; ++t)
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(t * dout), dout,
                  c.out.edge_output.row(b + t).begin());
  });
}

// Instantiates one pipeline kernel over one CU's node range.
inline Net make_net(const PipelineSpec& spec, const KernelSpec& kernel, const Context& c,
                    std::optional<std::uint64_t> capacity) {
  Net net;
  const std::size_t n = c.range.size();
  const EdgeIndex m = c.e1 - c.e0;
  for (const auto& id : kernel.stages) {
    Stage s;
    s.id = id;
    const auto& sp = spec.stage(id);
    s.jobs = sp.granularity == Granularity::per_node ? n : m;
    if (sp.granularity == Granularity::per_node)
      s.gather_count = [&c](std::size_t j) { return c.g.degree(c.node(j)); };
    net.stages.push_back(std::move(s));
  }
  for (const auto& f : spec.fifos) {
    if (std::find(kernel.stages.begin(), kernel.stages.end(), f.from) == kernel.stages.end())
      continue;
    const std::size_t ch = net.channels.size();
    net.channels.push_back({f.from, f.to, capacity.value_or(f.capacity), {}, 0, 0});
    if (net.channels.back().capacity == 0) throw RangeError("FIFO capacity must be at least 1");
    net.stage(f.from).out.push_back(ch);
    net.stage(f.to).in.push_back({ch, is_gather(spec, f)});
  }
  return net;
}

inline void bind(Net& net, const KernelSpec& kernel, const Context& c, const ModelParams& params) {
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GcnParams>) bind_gcn(net, c, p);
        else if constexpr (std::is_same_v<T, SageParams>) bind_sage(net, c, p);
        else if constexpr (std::is_same_v<T, GinParams>) bind_gin(net, c, p);
        else if constexpr (std::is_same_v<T, GatParams>) {
          if (kernel.name == "gat_kernel1") bind_gat_kernel1(net, c, p);
          else bind_gat_kernel2(net, c, p);
        } else if constexpr (std::is_same_v<T, MonetParams>) bind_monet(net, c, p);
        else bind_gatedgcn(net, c, p);
      },
      params);
  for (const auto& s : net.stages)
    if (!s.body.finish) throw Error("stage '" + s.id + "' has no behavior for this model");
}

}  // namespace stream

// Runs the layer through the pipeline stage DAG. Kernels run one after the
// other; within a kernel each CU processes its contiguous node range.
inline LayerOutput execute_streaming(const PipelineSpec& spec, const CsrGraph& g,
                                     const FeatureMatrix& H, const ModelParams& params,
                                     const EdgeFeatures& edge_features = {},
                                     StreamOptions opts = {}) {
  validate(spec);
  validate_params(params);
  if (kind_of(params) != spec.model)
    throw Error("parameters are for " + std::string(to_string(kind_of(params))) +
                " but the pipeline is for " + std::string(to_string(spec.model)));
  const Dims d = dims_of(params);
  if (!(d == spec.dims)) throw DimensionError("parameter dims do not match the pipeline dims");
  ref::check_features(g, H, d.in);
  const std::size_t n = g.num_nodes(), m = g.num_edges(), width = output_width(spec.model, d);
  if (spec.model == ModelKind::gatedgcn &&
      (edge_features.rows() != m || edge_features.cols() != d.in))
    throw DimensionError("edge features must be m x d_in");

  LayerOutput out;
  out.output = FeatureMatrix(n, width);
  std::optional<ref::GatIntermediate> mid;
  std::vector<PseudoCoord> pseudo;
  if (spec.model == ModelKind::gat) {
    out.attention = EdgeFeatures(m, d.heads);
    mid.emplace(ref::GatIntermediate{FeatureMatrix(n, d.heads * d.out), DenseMatrix(n, d.heads),
                                     DenseMatrix(n, d.heads)});
  }
  if (spec.model == ModelKind::gatedgcn) out.edge_output = EdgeFeatures(m, d.out);
  if (spec.model == ModelKind::monet) pseudo = pseudo_coordinates(g);
  if (n == 0) return out;

  const auto ranges = partition_contiguous(n, std::min(spec.num_cus, n));
  const auto off = g.row_offsets();
  for (const auto& kernel : spec.kernels)
    for (const auto& r : ranges) {
      stream::Context c{g, H, edge_features, r, off[r.start], off[r.end], out,
                        mid ? &*mid : nullptr, &pseudo};
      auto net = stream::make_net(spec, kernel, c, opts.capacity);
      stream::bind(net, kernel, c, params);
      stream::run(net, opts.scheduler);
    }
  return out;
}

}  // namespace gnnhls
