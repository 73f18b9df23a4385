#include "multipa/completeness.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "multipa/errors.hpp"

namespace multipa {

CompletenessResult completeness_from_durations(const std::vector<double>& durations, const CompletenessConfig& cfg) {
  if (durations.empty()) throw EmptyTranscript("completeness requires at least one word");
  if (!(cfg.duration_threshold >= 0.0)) throw PreconditionError("duration threshold must be non-negative");
  CompletenessResult r;
  r.durations = durations;
  r.complete_flags.reserve(durations.size());
  std::size_t complete = 0;
  for (double d : durations) {
    const bool ok = d >= cfg.duration_threshold;
    r.complete_flags.push_back(ok);
    complete += ok ? 1 : 0;
  }
  r.score = static_cast<double>(complete) / static_cast<double>(durations.size());
  return r;
}

CompletenessResult completeness_score(const AlignedTranscript& aligned, const CompletenessConfig& cfg) {
  if (aligned.words.empty()) throw EmptyTranscript(aligned.utterance_id + ": no words to assess");
  std::vector<double> durations;
  durations.reserve(aligned.words.size());
  for (const auto& w : aligned.words) durations.push_back(w.duration());
  return completeness_from_durations(durations, cfg);
}

Histogram histogram(const std::vector<double>& samples, double lo, double hi, std::size_t bins) {
  if (bins == 0 || !(hi > lo)) throw PreconditionError("histogram needs bins > 0 and hi > lo");
  Histogram h;
  h.lo = lo;
  h.bin_width = (hi - lo) / static_cast<double>(bins);
  h.counts.assign(bins, 0);
  for (double s : samples) {
    auto bin = static_cast<long>(std::floor((s - lo) / h.bin_width));
    bin = std::clamp<long>(bin, 0, static_cast<long>(bins) - 1);
    ++h.counts[static_cast<std::size_t>(bin)];
  }
  return h;
}

std::vector<double> default_threshold_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(i * 0.005);
  return grid;
}

SimulationReport sweep_thresholds(const std::vector<double>& complete_durations,
                                  const std::vector<double>& incomplete_durations, const std::vector<double>& grid) {
  if (complete_durations.empty() || incomplete_durations.empty()) {
    throw PreconditionError("threshold sweep needs samples of both classes");
  }
  if (grid.empty()) throw PreconditionError("threshold grid is empty");
  SimulationReport report;
  report.complete_durations = complete_durations;
  report.incomplete_durations = incomplete_durations;
  report.threshold_grid = grid;
  report.best_f1 = -1.0;
  for (double t : grid) {
    std::size_t tp = 0, fp = 0;
    for (double d : incomplete_durations) tp += d < t ? 1 : 0;
    for (double d : complete_durations) fp += d < t ? 1 : 0;
    const std::size_t fn = incomplete_durations.size() - tp;
    const double f1 = tp == 0 ? 0.0 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
    report.f1_per_threshold.push_back(f1);
    if (f1 > report.best_f1) {
      report.best_f1 = f1;
      report.best_threshold = t;
    }
  }
  const double hi = std::max(0.5, grid.back());
  report.complete_histogram = histogram(complete_durations, 0.0, hi, 50);
  report.incomplete_histogram = histogram(incomplete_durations, 0.0, hi, 50);
  return report;
}

SimulationOutput simulate_incomplete_corpus(const std::vector<SimulationInput>& subset,
                                            const std::vector<std::string>& lexicon, const AlignFn& align,
                                            std::uint64_t insertion_seed) {
  std::mt19937_64 rng(insertion_seed);
  SimulationOutput out;
  for (const auto& item : subset) {
    const std::set<std::string> present(item.words.begin(), item.words.end());
    std::vector<std::string> candidates;
    for (const auto& w : lexicon) {
      if (!present.count(w)) candidates.push_back(w);
    }
    if (candidates.empty()) throw PreconditionError("no candidate words to insert into " + item.utterance_id);
    // Draws happen before alignment so positions stay fixed even when
    // an alignment fails.
    std::uniform_int_distribution<std::size_t> pick_word(0, candidates.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_pos(0, item.words.size());
    const std::string inserted = candidates[pick_word(rng)];
    const std::size_t pos = pick_pos(rng);

    RawTranscript augmented{item.words, TranscriptSource::kTarget};
    augmented.words.insert(augmented.words.begin() + static_cast<long>(pos), inserted);
    try {
      AlignedTranscript aligned = align(augmented, item.audio);
      aligned.utterance_id = item.utterance_id;
      out.utterances.push_back({item.utterance_id, std::move(aligned), pos, inserted});
    } catch (const AlignmentFailure&) {
      ++out.skipped;
    }
  }
  return out;
}

void collect_durations(const SimulationOutput& sim, std::vector<double>& complete, std::vector<double>& incomplete) {
  for (const auto& u : sim.utterances) {
    for (std::size_t i = 0; i < u.aligned.words.size(); ++i) {
      (i == u.inserted_index ? incomplete : complete).push_back(u.aligned.words[i].duration());
    }
  }
}

namespace {

constexpr double kWidth = 640, kHeight = 360, kMargin = 48;

std::string svg_header(const std::string& title) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
    << title << "</text>\n"
    << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\"" << kWidth - kMargin / 2 << "\" y2=\""
    << kHeight - kMargin << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin / 2 << "\" x2=\"" << kMargin << "\" y2=\"" << kHeight - kMargin
    << "\" stroke=\"black\"/>\n";
  return s.str();
}

}  // namespace

std::string render_histogram_svg(const SimulationReport& report) {
  const auto& hc = report.complete_histogram;
  const auto& hi = report.incomplete_histogram;
  if (hc.counts.empty() || hi.counts.empty()) return {};
  // Densities so that classes of different sizes share one axis.
  auto density = [](const Histogram& h) {
    std::size_t total = 0;
    for (auto c : h.counts) total += c;
    std::vector<double> d;
    for (auto c : h.counts) d.push_back(total ? static_cast<double>(c) / static_cast<double>(total) : 0.0);
    return d;
  };
  const auto dc = density(hc), di = density(hi);
  const double ymax = std::max(*std::max_element(dc.begin(), dc.end()), *std::max_element(di.begin(), di.end()));
  const double plot_w = kWidth - 1.5 * kMargin, plot_h = kHeight - 1.5 * kMargin;
  const double bar_w = plot_w / static_cast<double>(dc.size());
  std::ostringstream s;
  s << svg_header("Word duration distribution (complete vs. incomplete)");
  auto bars = [&](const std::vector<double>& d, const char* color) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double h = ymax > 0 ? d[i] / ymax * plot_h : 0.0;
      s << "<rect x=\"" << kMargin + i * bar_w << "\" y=\"" << kHeight - kMargin - h << "\" width=\"" << bar_w
        << "\" height=\"" << h << "\" fill=\"" << color << "\" fill-opacity=\"0.5\"/>\n";
    }
  };
  bars(dc, "steelblue");
  bars(di, "darkorange");
  const double x_hi = hc.lo + hc.bin_width * static_cast<double>(hc.counts.size());
  s << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\" font-size=\"12\">duration (s), 0 - "
    << x_hi << "</text>\n"
    << "<text x=\"" << kWidth - 160 << "\" y=\"40\" font-size=\"12\" fill=\"steelblue\">complete (n=" << report.complete_durations.size()
    << ")</text>\n"
    << "<text x=\"" << kWidth - 160 << "\" y=\"56\" font-size=\"12\" fill=\"darkorange\">incomplete (n="
    << report.incomplete_durations.size() << ")</text>\n</svg>\n";
  return s.str();
}

std::string render_f1_svg(const SimulationReport& report) {
  if (report.threshold_grid.empty()) return {};
  const double plot_w = kWidth - 1.5 * kMargin, plot_h = kHeight - 1.5 * kMargin;
  const double x_hi = report.threshold_grid.back() > 0 ? report.threshold_grid.back() : 1.0;
  std::ostringstream s;
  s << svg_header("F1 of incomplete-word detection vs. duration threshold");
  s << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < report.threshold_grid.size(); ++i) {
    s << kMargin + report.threshold_grid[i] / x_hi * plot_w << "," << kHeight - kMargin - report.f1_per_threshold[i] * plot_h
      << " ";
  }
  s << "\"/>\n";
  const double bx = kMargin + report.best_threshold / x_hi * plot_w;
  s << "<line x1=\"" << bx << "\" y1=\"" << kMargin / 2 << "\" x2=\"" << bx << "\" y2=\"" << kHeight - kMargin
    << "\" stroke=\"crimson\" stroke-dasharray=\"4 3\"/>\n"
    << "<text x=\"" << bx + 6 << "\" y=\"40\" font-size=\"12\" fill=\"crimson\">best " << report.best_threshold
    << " s, F1 " << report.best_f1 << "</text>\n"
    << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12
    << "\" text-anchor=\"middle\" font-size=\"12\">threshold (s)</text>\n</svg>\n";
  return s.str();
}

void sample_duration_populations(const DurationPopulations& pop, std::uint64_t seed, std::vector<double>& complete,
                                 std::vector<double>& incomplete) {
  if (pop.complete_count == 0 || pop.incomplete_count == 0) throw PreconditionError("population sizes must be positive");
  if (!(pop.incomplete_sigma > 0.0) || !(pop.incomplete_mean > 0.0)) {
    throw PreconditionError("incomplete population needs a positive mean and spread");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> main_mode(pop.complete_mean, pop.complete_std);
  std::normal_distribution<double> short_mode(pop.short_word_mean, pop.short_word_std);
  // E[lognormal(mu, s)] = exp(mu + s^2 / 2)
  const double mu = std::log(pop.incomplete_mean) - 0.5 * pop.incomplete_sigma * pop.incomplete_sigma;
  std::lognormal_distribution<double> missing(mu, pop.incomplete_sigma);
  complete.clear();
  incomplete.clear();
  for (std::size_t i = 0; i < pop.complete_count; ++i) {
    const double d = unit(rng) < pop.short_word_fraction ? short_mode(rng) : main_mode(rng);
    complete.push_back(std::max(pop.min_duration, d));
  }
  for (std::size_t i = 0; i < pop.incomplete_count; ++i) incomplete.push_back(std::max(pop.min_duration, missing(rng)));
}

}  // namespace multipa
