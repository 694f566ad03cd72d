#include "alti/harness.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace alti {

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<MethodEvaluation> evaluate_dataset(const ModelBundle& bundle, const std::vector<EncodedInput>& inputs,
                                               const std::vector<Method>& methods, const AttributionOptions& options,
                                               const BinSet& bins, int jobs) {
  if (inputs.empty()) {
    throw std::invalid_argument("evaluate: empty dataset");
  }
  bins.validate();
  // detail[s][m]
  std::vector<std::vector<SentenceFaithfulness>> detail(inputs.size());
  std::vector<std::vector<std::string>> names(inputs.size());
  parallel_for(inputs.size(), jobs, [&](std::size_t s) {
    const ForwardTrace trace = forward(bundle, inputs[s], options.target);
    for (const Method m : methods) {
      AttributionOptions opt = options;
      opt.seed = options.seed + s;
      const AttributionVector attr = attribute(bundle, trace, m, opt);
      detail[s].push_back(faithfulness(bundle, inputs[s], attr, bins, options.target));
      names[s].push_back(attr.method);
    }
  });

  std::vector<MethodEvaluation> out;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    MethodEvaluation e{methods[m], names.front()[m], FaithfulnessReport(bins), {}};
    for (std::size_t s = 0; s < inputs.size(); ++s) {
      e.report.add(detail[s][m]);
      e.detail.push_back(detail[s][m]);
    }
    e.report = e.report.finished();
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<PairAgreement> run_robustness(const std::vector<const ModelBundle*>& bundles,
                                          const std::vector<std::string>& texts, const std::vector<Method>& methods,
                                          const AttributionOptions& options, int jobs) {
  if (bundles.size() < 2) {
    throw std::invalid_argument("robustness: need at least two bundles");
  }
  for (std::size_t b = 1; b < bundles.size(); ++b) {
    if (!(bundles[b]->config == bundles.front()->config)) {
      throw std::invalid_argument("robustness: bundle " + std::to_string(b) + " has a different config");
    }
    if (!(bundles[b]->vocab == bundles.front()->vocab)) {
      throw std::invalid_argument("robustness: bundle " + std::to_string(b) + " has a different vocabulary");
    }
  }
  if (texts.empty()) {
    throw std::invalid_argument("robustness: empty dataset");
  }

  // attrs[s][b][m]; every bundle shares the tokenization.
  std::vector<EncodedInput> inputs;
  for (const auto& t : texts) inputs.push_back(tokenize(t, *bundles.front()));
  std::vector<std::vector<std::vector<AttributionVector>>> attrs(texts.size());
  parallel_for(texts.size(), jobs, [&](std::size_t s) {
    for (const ModelBundle* bundle : bundles) {
      const ForwardTrace trace = forward(*bundle, inputs[s], options.target);
      std::vector<AttributionVector> per_method;
      for (const Method m : methods) {
        AttributionOptions opt = options;
        opt.seed = options.seed + s;
        per_method.push_back(attribute(*bundle, trace, m, opt));
      }
      attrs[s].push_back(std::move(per_method));
    }
  });

  std::vector<PairAgreement> out;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    for (std::size_t a = 0; a < bundles.size(); ++a) {
      for (std::size_t b = a + 1; b < bundles.size(); ++b) {
        PairAgreement p{attrs.front()[a][m].method, a, b, {}, {}};
        for (std::size_t s = 0; s < texts.size(); ++s) {
          const auto& mask = inputs[s].special_mask;
          const auto& va = attrs[s][a][m].scores;
          const auto& vb = attrs[s][b][m].scores;
          p.jaccard.push_back(jaccard_top25(va, vb, mask));
          const Vector na = non_special(va, mask);
          const Vector nb = non_special(vb, mask);
          p.spearman.push_back(na.size() >= 2 ? spearman(na, nb) : std::nullopt);
        }
        out.push_back(std::move(p));
      }
    }
  }
  return out;
}

}  // namespace alti
