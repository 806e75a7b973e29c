#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "nwsr/adam.hpp"
#include "nwsr/checkpoint.hpp"
#include "nwsr/loss.hpp"
#include "nwsr/network.hpp"
#include "nwsr/parallel.hpp"
#include "nwsr/patches.hpp"
#include "nwsr/rng.hpp"

namespace nwsr {

struct PBTConfig {
    int population = 6;
    int iterations = 100;
    int perturbation_interval = 20;
    std::vector<double> lr_grid = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7};
    int epochs_per_iteration = 1;
    double perturb_factors[2] = {0.8, 1.25};
    int batch = 16;
    std::uint64_t seed = 0;
};

inline void validate_pbt_config(const PBTConfig& c) {
    if (c.population < 1) throw std::invalid_argument("PBTConfig: population must be >= 1");
    if (c.iterations < 1) throw std::invalid_argument("PBTConfig: iterations must be >= 1");
    if (c.perturbation_interval < 1 || c.iterations % c.perturbation_interval != 0)
        throw std::invalid_argument("PBTConfig: interval must divide iterations");
    if (c.lr_grid.empty()) throw std::invalid_argument("PBTConfig: empty learning-rate grid");
    if (c.batch < 1) throw std::invalid_argument("PBTConfig: batch must be >= 1");
    if (c.epochs_per_iteration < 1)
        throw std::invalid_argument("PBTConfig: epochs_per_iteration must be >= 1");
}

struct HistoryEntry {
    int iteration = 0;  // 1-based
    int member = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct ExploitEvent {
    int iteration = 0;
    int member = 0;
    int source = 0;
    double pre_min_val = 0.0;
    double post_min_val = 0.0;  // re-validated after the copies
};

struct PBTResult {
    NetworkDescriptor desc;
    std::vector<double> best_params;
    int best_member = 0;
    double best_val = 0.0;
    std::vector<HistoryEntry> history;
    std::vector<ExploitEvent> events;
};

// Test/observation hook: called right after an exploit copy, before any
// further training of the copying member.
using ExploitObserver =
    std::function<void(const ExploitEvent&, const std::vector<double>& member_params,
                       const std::vector<double>& source_params)>;

namespace detail {

struct Member {
    Network net;
    AdamState opt;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = std::numeric_limits<double>::quiet_NaN();
};

// One epoch of batched SSIM+L1 training; returns the mean per-batch loss.
// Deterministic per (seed, member, iteration, epoch) regardless of how
// members are scheduled across threads.
inline double train_epoch(Member& m, const PatchSet& train, const PBTConfig& cfg, int member_id,
                          int iteration, int epoch) {
    std::vector<std::size_t> order(train.items.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::stream(cfg.seed, 0x7e10u + static_cast<std::uint64_t>(member_id),
                          static_cast<std::uint64_t>(iteration),
                          static_cast<std::uint64_t>(epoch));
    rng.shuffle(order);

    double loss_acc = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
        const std::size_t stop = std::min(order.size(), start + cfg.batch);
        const double inv = 1.0 / static_cast<double>(stop - start);
        m.net.zero_grad();
        double batch_loss = 0.0;
        for (std::size_t i = start; i < stop; ++i) {
            const PatchPair& pp = train.items[order[i]];
            const Tensor y = m.net.forward(pp.input);
            LossResult lr_ = ssim_l1_loss(y, pp.target);
            batch_loss += lr_.loss * inv;
            for (double& gg : lr_.grad.v) gg *= inv;
            m.net.backward(lr_.grad);
        }
        m.opt.lr = m.lr;
        adam_step(m.net, m.opt);
        loss_acc += batch_loss;
        ++batches;
    }
    return batches > 0 ? loss_acc / batches : 0.0;
}

inline double validate(Member& m, const PatchSet& val) {
    double acc = 0.0;
    for (const PatchPair& pp : val.items) {
        const Tensor y = m.net.forward(pp.input);
        acc += ssim_l1_loss(y, pp.target).loss;
    }
    return acc / static_cast<double>(val.items.size());
}

}  // namespace detail

// Population Based Training: every member trains epochs_per_iteration epochs
// per iteration and is validated on the SSIM+L1 loss; at every perturbation
// interval the bottom half copies weights, optimizer state and learning rate
// from a uniformly drawn top-half member (exploit) and multiplies its
// learning rate by a factor from perturb_factors (explore). Returns the
// member with the best final validation loss.
inline PBTResult pbt_run(const PBTConfig& cfg, const NetworkDescriptor& desc,
                         const PatchSet& train, const PatchSet& val,
                         const ExploitObserver& observer = nullptr) {
    validate_pbt_config(cfg);
    if (train.items.empty() || val.items.empty())
        throw std::invalid_argument("pbt_run: empty train or validation patch set");

    std::vector<detail::Member> members(cfg.population);
    for (int i = 0; i < cfg.population; ++i) {
        members[i].net = build_network(desc);
        Rng init_rng = Rng::stream(cfg.seed, 0x5eedu, static_cast<std::uint64_t>(i));
        members[i].net.init_params(init_rng);
        members[i].opt = AdamState(members[i].net.param_count(), 0.0);
        members[i].lr = cfg.lr_grid[i % cfg.lr_grid.size()];
    }

    PBTResult result;
    result.desc = desc;
    Rng orch = Rng::stream(cfg.seed, 0x0b71u);

    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        parallel_for(0, cfg.population, [&](std::int64_t i) {
            auto& m = members[i];
            double tl = 0.0;
            for (int e = 0; e < cfg.epochs_per_iteration; ++e)
                tl = detail::train_epoch(m, train, cfg, static_cast<int>(i), iter, e);
            m.train_loss = tl;
            m.val_loss = detail::validate(m, val);
        });
        for (int i = 0; i < cfg.population; ++i)
            result.history.push_back(
                HistoryEntry{iter, i, members[i].lr, members[i].train_loss, members[i].val_loss});

        const bool boundary = (iter % cfg.perturbation_interval == 0) && iter < cfg.iterations;
        if (!boundary || cfg.population < 2) continue;

        // truncation selection: rank by validation loss, lower is better
        std::vector<int> rank(cfg.population);
        std::iota(rank.begin(), rank.end(), 0);
        std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) {
            return members[a].val_loss < members[b].val_loss;
        });
        const int top_n = cfg.population - cfg.population / 2;
        double pre_min = members[rank[0]].val_loss;

        std::vector<ExploitEvent> pending;
        for (int r = top_n; r < cfg.population; ++r) {
            const int dst = rank[r];
            const int src = rank[static_cast<int>(orch.uniform_index(top_n))];
            auto& md = members[dst];
            auto& ms = members[src];
            restore_params(md.net, dump_params(ms.net));
            md.opt = ms.opt;
            md.lr = ms.lr;
            if (observer) {
                ExploitEvent ev{iter, dst, src, pre_min, 0.0};
                observer(ev, dump_params(md.net), dump_params(ms.net));
            }
            md.lr *= (orch.uniform() < 0.5) ? cfg.perturb_factors[0] : cfg.perturb_factors[1];
            pending.push_back(ExploitEvent{iter, dst, src, pre_min, 0.0});
        }

        // the copies cannot lose the best member, so the population minimum
        // is non-increasing across the boundary; re-validate to record it
        double post_min = std::numeric_limits<double>::infinity();
        parallel_for(0, cfg.population, [&](std::int64_t i) {
            members[i].val_loss = detail::validate(members[i], val);
        });
        for (const auto& m : members) post_min = std::min(post_min, m.val_loss);
        for (auto& ev : pending) {
            ev.post_min_val = post_min;
            result.events.push_back(ev);
        }
    }

    int best = 0;
    for (int i = 1; i < cfg.population; ++i)
        if (members[i].val_loss < members[best].val_loss) best = i;
    result.best_member = best;
    result.best_val = members[best].val_loss;
    result.best_params = dump_params(members[best].net);
    return result;
}

}  // namespace nwsr
