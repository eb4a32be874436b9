// SPDX-License-Identifier: Apache-2.0
#include "mgs/isp_core.hpp"

#include <algorithm>
#include <cassert>
#include <thread>

#include "mgs/ssd_sim.hpp"

namespace mgs::isp {

namespace {

Kmer128 level_prefix(Kmer128 w, unsigned k) noexcept { return prefix_word(w, k); }

}  // namespace

Intersector::Intersector(std::span<const Kmer128> db, kernels::Isa isa) : db_(db), isa_(isa) {}

void Intersector::consume_query_run(std::span<const Kmer128> query, std::size_t from, std::size_t to) {
  for (std::size_t i = from; i < to; ++i) {
    if (have_last_query_ && !(last_query_ < query[i]))
      raise(Err::unsorted_input, "query stream not strictly increasing");
    last_query_ = query[i];
    have_last_query_ = true;
  }
  stats_.examined += to - from;
}

void Intersector::feed(std::span<const Kmer128> query, std::vector<Kmer128>& out) {
  std::size_t qi = 0;
  const std::size_t qn = query.size();
  const std::size_t dn = db_.size();

  auto validate_db_through = [&](std::size_t upto) {
    for (; db_validated_ < upto; ++db_validated_) {
      if (db_validated_ > 0 && !(db_[db_validated_ - 1] < db_[db_validated_]))
        raise(Err::unsorted_input, "database stream not strictly increasing");
    }
  };

  while (qi < qn && di_ < dn) {
    const Kmer128 q = query[qi];
    const Kmer128 d = db_[di_];
    if (q == d) {
      consume_query_run(query, qi, qi + 1);
      validate_db_through(di_ + 1);
      out.push_back(q);
      ++stats_.matches;
      ++stats_.examined;  // the database element
      ++qi;
      ++di_;
    } else if (q < d) {
      const std::size_t run = kernels::advance_lt(query.data() + qi, qn - qi, d, isa_);
      consume_query_run(query, qi, qi + run);
      qi += run;
    } else {
      const std::size_t run = kernels::advance_lt(db_.data() + di_, dn - di_, q, isa_);
      validate_db_through(di_ + run);
      stats_.examined += run;
      di_ += run;
    }
  }
  // Database exhausted: the remaining queries are unmatched but still count
  // as examined once each.
  if (qi < qn) {
    consume_query_run(query, qi, qn);
  }
}

std::vector<Kmer128> stream_intersect(std::span<const Kmer128> query, std::span<const Kmer128> db,
                                      IntersectStats* stats, kernels::Isa isa) {
  Intersector ix(db, isa);
  std::vector<Kmer128> out;
  ix.feed(query, out);
  if (stats) *stats = ix.stats();
  return out;
}

StreamRetriever::StreamRetriever(const db::StreamSketch& sketch) : sketch_(sketch) {
  hits_.level_ks.push_back(sketch.k_max);
  for (const auto& level : sketch.levels) hits_.level_ks.push_back(level.k);
  slot_cursor_.assign(sketch.levels.size(), 0);
  slot_charged_.assign(sketch.levels.size(), 0);
}

void StreamRetriever::charge_slots(Kmer128 q, std::size_t ti) {
  for (std::size_t li = 0; li < sketch_.levels.size(); ++li) {
    if (slot_charged_[li]) continue;
    const unsigned k = sketch_.levels[li].k;
    if (level_prefix(q, k) != level_prefix(sketch_.table[ti].kmer, k)) continue;
    slot_charged_[li] = 1;
    const auto& slot = sketch_.levels[li].slots[slot_cursor_[li]];
    for (const TaxId t : slot) {
      auto& counts = hits_.counts[t];
      if (counts.empty()) counts.assign(hits_.level_ks.size(), 0);
      ++counts[li + 1];
    }
  }
}

void StreamRetriever::advance_table() {
  // The index generator: a prefix change between consecutive table entries
  // starts the next slot at that level.
  const std::size_t next = ti_ + 1;
  if (next < sketch_.table.size()) {
    for (std::size_t li = 0; li < sketch_.levels.size(); ++li) {
      const unsigned k = sketch_.levels[li].k;
      if (level_prefix(sketch_.table[ti_].kmer, k) != level_prefix(sketch_.table[next].kmer, k)) {
        ++slot_cursor_[li];
        slot_charged_[li] = 0;
        if (trace_) {
          if (trace_->positions.size() < sketch_.levels.size())
            trace_->positions.resize(sketch_.levels.size());
          trace_->positions[li].push_back(slot_cursor_[li]);
        }
      }
    }
  }
  ++ti_;
}

void StreamRetriever::feed(std::span<const Kmer128> inter) {
  const std::size_t tn = sketch_.table.size();
  for (const Kmer128 q : inter) {
    if (have_last_q_ && !(last_q_ < q))
      raise(Err::unsorted_input, "intersection stream not strictly increasing");
    last_q_ = q;
    have_last_q_ = true;
    if (tn == 0) continue;

    while (true) {
      if (ti_ >= tn) {
        // Table exhausted; the final slots can still match by prefix.
        charge_slots(q, tn - 1);
        break;
      }
      charge_slots(q, ti_);
      const Kmer128 entry = sketch_.table[ti_].kmer;
      if (entry < q) {
        advance_table();
      } else if (entry == q) {
        for (const TaxId t : sketch_.table[ti_].taxids) {
          auto& counts = hits_.counts[t];
          if (counts.empty()) counts.assign(hits_.level_ks.size(), 0);
          ++counts[0];
        }
        break;
      } else {
        break;
      }
    }
  }
}

TaxHits StreamRetriever::finish() { return std::move(hits_); }

TaxHits retrieve_taxids(std::span<const Kmer128> inter, const db::StreamSketch& sketch) {
  StreamRetriever r(sketch);
  r.feed(inter);
  return r.finish();
}

std::set<TaxId> call_presence(const TaxHits& hits, const std::map<TaxId, std::uint32_t>& sketch_sizes,
                              double tau) {
  if (!(tau > 0.0) || tau > 1.0) raise(Err::bad_threshold, "tau must be in (0, 1]");
  std::set<TaxId> present;
  if (hits.level_ks.empty()) return present;
  const double k_max = hits.level_ks.front();
  for (const auto& [taxid, counts] : hits.counts) {
    const auto it = sketch_sizes.find(taxid);
    if (it == sketch_sizes.end() || it->second == 0) continue;
    double weighted = 0.0;
    for (std::size_t li = 0; li < counts.size(); ++li)
      weighted += (hits.level_ks[li] / k_max) * static_cast<double>(counts[li]);
    if (weighted / it->second >= tau) present.insert(taxid);
  }
  return present;
}

Step2Result run_step2(const prep::QueryKmerSet& query, std::span<const Kmer128> db,
                      const db::StreamSketch& sketch, const Step2Options& opts) {
  Step2Result result;
  Intersector ix(db, opts.isa);
  StreamRetriever retriever(sketch);

  const std::size_t batch_records = std::max<std::size_t>(1, opts.batch_bytes / sizeof(Kmer128));
  const std::size_t budget_records =
      std::max<std::size_t>(1, opts.intersection_budget / sizeof(Kmer128));

  std::vector<Kmer128> staging;
  std::vector<Kmer128> inter;  // current in-budget window of the intersection
  staging.reserve(batch_records);
  std::size_t sequence = 0;

  for (const auto& bucket : query.buckets) {
    std::uint64_t bucket_matches = 0;
    std::size_t i = 0;
    while (i < bucket.size()) {
      staging.clear();
      const std::size_t end = std::min(bucket.size(), i + batch_records);
      for (; i < end; ++i) staging.push_back(bucket[i].kmer);
      const Batch batch{staging, sequence++};
      const std::size_t before = inter.size();
      ix.feed(batch.payload, inter);
      bucket_matches += inter.size() - before;
      if (inter.size() >= budget_records) {
        // Budget full: retrieve what we have, then resume intersecting.
        retriever.feed(inter);
        result.intersection.kmers.insert(result.intersection.kmers.end(), inter.begin(), inter.end());
        inter.clear();
        ++result.retrieval_flushes;
      }
    }
    result.intersection.per_bucket.push_back(bucket_matches);
  }
  retriever.feed(inter);
  result.intersection.kmers.insert(result.intersection.kmers.end(), inter.begin(), inter.end());
  result.hits = retriever.finish();
  result.stats = ix.stats();
  return result;
}

std::vector<Kmer128> striped_intersect(std::span<const Kmer128> query, std::span<const Kmer128> db,
                                       const sim::FtlMapping& mapping, unsigned threads) {
  const std::uint64_t rpb = std::max<std::uint64_t>(1, mapping.block_bytes / sizeof(Kmer128));
  const std::size_t n_blocks = (db.size() + rpb - 1) / rpb;
  std::vector<std::vector<Kmer128>> per_block(n_blocks);

  const unsigned lanes = std::max(1u, mapping.channels);
  auto lane_worker = [&](unsigned lane) {
    for (std::size_t j = lane; j < n_blocks; j += lanes) {
      const std::size_t lo = j * rpb;
      const std::size_t hi = std::min<std::size_t>(db.size(), lo + rpb);
      const std::span<const Kmer128> stripe = db.subspan(lo, hi - lo);
      // Queries for this block: the value range [stripe.front(), stripe.back()].
      const auto q_lo = std::lower_bound(query.begin(), query.end(), stripe.front());
      const auto q_hi = std::upper_bound(q_lo, query.end(), stripe.back());
      per_block[j] = stream_intersect(std::span<const Kmer128>(q_lo, q_hi), stripe);
    }
  };

  if (threads <= 1 || lanes == 1) {
    for (unsigned lane = 0; lane < lanes; ++lane) lane_worker(lane);
  } else {
    std::vector<std::thread> pool;
    const unsigned n = std::min(threads, lanes);
    std::atomic<unsigned> next{0};
    for (unsigned t = 0; t < n; ++t)
      pool.emplace_back([&] {
        for (;;) {
          const unsigned lane = next.fetch_add(1);
          if (lane >= lanes) return;
          lane_worker(lane);
        }
      });
    for (auto& t : pool) t.join();
  }

  std::vector<Kmer128> out;
  for (auto& block : per_block) out.insert(out.end(), block.begin(), block.end());
  return out;
}

}  // namespace mgs::isp
