#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "noov/corpus.hpp"
#include "noov/error.hpp"

namespace noov {

enum class BleuSmoothing { none, add_one_for_zero };

/// Sufficient statistics of corpus BLEU; sums over sentences.
struct BleuStats {
  int max_n = 4;
  std::vector<double> matches;  // clipped n-gram matches, index n-1
  std::vector<double> totals;   // hypothesis n-grams, index n-1
  double hyp_length = 0;
  double ref_length = 0;

  explicit BleuStats(int n = 4) : max_n(n), matches(static_cast<std::size_t>(n), 0.0),
                                  totals(static_cast<std::size_t>(n), 0.0) {}

  BleuStats& operator+=(const BleuStats& o) {
    if (o.max_n != max_n) throw ValidationError("cannot pool BLEU statistics of different orders");
    for (std::size_t k = 0; k < matches.size(); ++k) {
      matches[k] += o.matches[k];
      totals[k] += o.totals[k];
    }
    hyp_length += o.hyp_length;
    ref_length += o.ref_length;
    return *this;
  }

  friend bool operator==(const BleuStats&, const BleuStats&) = default;
};

struct BleuReport {
  double bleu = 0;
  std::vector<double> precisions;
  double brevity_penalty = 0;
  double hyp_length = 0;
  double ref_length = 0;
  BleuStats stats;
};

inline BleuStats sentence_stats(const Sentence& hyp, const Sentence& ref, int max_n = 4) {
  BleuStats s(max_n);
  s.hyp_length = static_cast<double>(hyp.size());
  s.ref_length = static_cast<double>(ref.size());
  for (int n = 1; n <= max_n; ++n) {
    const auto un = static_cast<std::size_t>(n);
    std::map<std::vector<Token>, int> ref_counts;
    for (std::size_t i = 0; i + un <= ref.size(); ++i) ++ref_counts[{ref.begin() + i, ref.begin() + i + un}];
    std::map<std::vector<Token>, int> hyp_counts;
    for (std::size_t i = 0; i + un <= hyp.size(); ++i) ++hyp_counts[{hyp.begin() + i, hyp.begin() + i + un}];
    double matched = 0, total = 0;
    for (const auto& [gram, c] : hyp_counts) {
      total += c;
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matched += std::min(c, it->second);
    }
    s.matches[un - 1] = matched;
    s.totals[un - 1] = total;
  }
  return s;
}

inline BleuReport bleu_from_stats(const BleuStats& s, BleuSmoothing smoothing = BleuSmoothing::none) {
  BleuReport r;
  r.stats = s;
  r.hyp_length = s.hyp_length;
  r.ref_length = s.ref_length;
  bool zero = false;
  double log_sum = 0;
  for (int k = 0; k < s.max_n; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    double p = s.totals[uk] > 0 ? s.matches[uk] / s.totals[uk] : 0.0;
    if (p == 0 && smoothing == BleuSmoothing::add_one_for_zero && s.totals[uk] > 0) {
      p = 1.0 / (2.0 * s.totals[uk]);
    }
    r.precisions.push_back(p);
    if (p == 0) {
      zero = true;
    } else {
      log_sum += std::log(p);
    }
  }
  if (s.hyp_length == 0) {
    r.brevity_penalty = 0;
  } else {
    r.brevity_penalty = s.hyp_length >= s.ref_length ? 1.0 : std::exp(1.0 - s.ref_length / s.hyp_length);
  }
  r.bleu = zero ? 0.0 : r.brevity_penalty * std::exp(log_sum / s.max_n);
  return r;
}

/// Corpus BLEU with a single reference per line, case-sensitive on tokens.
inline BleuReport bleu_corpus(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs,
                              int max_n = 4, BleuSmoothing smoothing = BleuSmoothing::none) {
  if (hyps.size() != refs.size()) {
    throw ValidationError("BLEU: " + std::to_string(hyps.size()) + " hypotheses vs " +
                          std::to_string(refs.size()) + " references");
  }
  if (hyps.empty()) throw ValidationError("BLEU of an empty corpus");
  if (max_n < 1) throw ValidationError("BLEU order must be >= 1");
  BleuStats total(max_n);
  for (std::size_t i = 0; i < hyps.size(); ++i) total += sentence_stats(hyps[i], refs[i], max_n);
  return bleu_from_stats(total, smoothing);
}

inline double sentence_bleu(const Sentence& hyp, const Sentence& ref, int max_n = 4) {
  return bleu_from_stats(sentence_stats(hyp, ref, max_n), BleuSmoothing::add_one_for_zero).bleu;
}

struct LengthBucket {
  std::size_t lo = 0;
  std::optional<std::size_t> hi;  // inclusive; none for the open last bucket
  std::size_t count = 0;
  std::optional<BleuReport> report;  // absent for empty buckets

  std::string label() const {
    return std::to_string(lo) + (hi ? "-" + std::to_string(*hi) : "+");
  }
};

struct LengthBucketReport {
  std::vector<std::size_t> boundaries;
  std::vector<LengthBucket> buckets;
};

/// Buckets on source length: boundaries {10,20,30} give 1-10, 11-20,
/// 21-30 and 31+. BLEU is computed independently per bucket.
inline LengthBucketReport length_bucket_report(const std::vector<Sentence>& hyps,
                                               const std::vector<Sentence>& refs,
                                               const std::vector<std::size_t>& src_lengths,
                                               const std::vector<std::size_t>& boundaries = {10, 20, 30},
                                               int max_n = 4) {
  if (hyps.size() != refs.size() || hyps.size() != src_lengths.size()) {
    throw ValidationError("bucket report: hypotheses, references and source lengths differ in count");
  }
  for (std::size_t k = 1; k < boundaries.size(); ++k) {
    if (boundaries[k] <= boundaries[k - 1]) throw ValidationError("bucket boundaries must be strictly increasing");
  }
  if (!boundaries.empty() && boundaries.front() == 0) throw ValidationError("bucket boundaries must be positive");
  LengthBucketReport r;
  r.boundaries = boundaries;
  std::size_t lo = 1;
  for (auto b : boundaries) {
    r.buckets.push_back({lo, b, 0, std::nullopt});
    lo = b + 1;
  }
  r.buckets.push_back({lo, std::nullopt, 0, std::nullopt});

  std::vector<BleuStats> stats(r.buckets.size(), BleuStats(max_n));
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto k = static_cast<std::size_t>(
        std::lower_bound(boundaries.begin(), boundaries.end(), src_lengths[i]) - boundaries.begin());
    stats[k] += sentence_stats(hyps[i], refs[i], max_n);
    ++r.buckets[k].count;
  }
  for (std::size_t k = 0; k < r.buckets.size(); ++k) {
    if (r.buckets[k].count > 0) r.buckets[k].report = bleu_from_stats(stats[k]);
  }
  return r;
}

/// BLEU in [0,1] shown as a percentage with two decimals.
inline std::string bleu_percent(double bleu) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", bleu * 100.0);
  return buf;
}

inline std::string bucket_report_tsv(const LengthBucketReport& r) {
  std::ostringstream os;
  os << "bucket\tcount\tbleu\n";
  for (const auto& b : r.buckets) {
    os << b.label() << '\t' << b.count << '\t' << (b.report ? bleu_percent(b.report->bleu) : "-") << '\n';
  }
  return os.str();
}

/// Bar chart of BLEU per bucket.
inline std::string bucket_report_svg(const LengthBucketReport& r) {
  const int w = 80, gap = 20, height = 200, top = 20, left = 40;
  const int width = left + static_cast<int>(r.buckets.size()) * (w + gap) + gap;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height + 60
     << "\">\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + height << "\" x2=\"" << width << "\" y2=\""
     << top + height << "\" stroke=\"black\"/>\n";
  for (std::size_t k = 0; k < r.buckets.size(); ++k) {
    const auto& b = r.buckets[k];
    const int x = left + gap + static_cast<int>(k) * (w + gap);
    const double v = b.report ? b.report->bleu : 0.0;
    const int h = static_cast<int>(std::lround(v * height));
    os << "<rect x=\"" << x << "\" y=\"" << top + height - h << "\" width=\"" << w << "\" height=\"" << h
       << "\" fill=\"steelblue\"/>\n";
    os << "<text x=\"" << x + w / 2 << "\" y=\"" << top + height - h - 4
       << "\" text-anchor=\"middle\" font-size=\"12\">" << (b.report ? bleu_percent(v) : "n/a")
       << "</text>\n";
    os << "<text x=\"" << x + w / 2 << "\" y=\"" << top + height + 16
       << "\" text-anchor=\"middle\" font-size=\"12\">" << b.label() << " (" << b.count << ")</text>\n";
  }
  os << "<text x=\"" << width / 2 << "\" y=\"" << top + height + 40
     << "\" text-anchor=\"middle\" font-size=\"12\">source length</text>\n";
  os << "</svg>\n";
  return os.str();
}

struct SummaryTables {
  std::string text;
  std::string tsv;
};

/// Labels with BLEU x 100 in input order.
inline SummaryTables experiment_summary(const std::vector<std::pair<std::string, BleuReport>>& runs) {
  std::size_t width = 5;
  for (const auto& [label, r] : runs) width = std::max(width, label.size());
  SummaryTables t;
  std::ostringstream txt, tsv;
  txt << std::string("label") << std::string(width - 5 + 2, ' ') << "BLEU\n";
  tsv << "label\tBLEU\n";
  for (const auto& [label, r] : runs) {
    const auto cell = bleu_percent(r.bleu);
    txt << label << std::string(width - label.size() + 2, ' ') << cell << '\n';
    tsv << label << '\t' << cell << '\n';
  }
  t.text = txt.str();
  t.tsv = tsv.str();
  return t;
}

inline std::string bleu_report_text(const BleuReport& r) {
  std::ostringstream os;
  os << "BLEU = " << bleu_percent(r.bleu);
  for (std::size_t k = 0; k < r.precisions.size(); ++k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", r.precisions[k]);
    os << (k == 0 ? " (p=" : "/") << buf;
  }
  char bp[32];
  std::snprintf(bp, sizeof bp, "%.4f", r.brevity_penalty);
  os << ", BP=" << bp << ", hyp_len=" << r.hyp_length << ", ref_len=" << r.ref_length << ")\n";
  return os.str();
}

}  // namespace noov
