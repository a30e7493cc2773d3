#include "chewsense/pipeline.hpp"

#include "chewsense/random.hpp"

#include <cstdio>
#include <future>

namespace chewsense::pipeline {

std::vector<synth::SessionPlan> cohort_plans(const CohortSpec& spec) {
  if (spec.participants == 0) throw ParameterError("cohort: need at least one participant");
  spec.base.validate();
  Rng rng(spec.seed);
  std::vector<synth::SessionPlan> plans;
  for (std::size_t p = 0; p < spec.participants; ++p) {
    synth::SessionPlan plan = spec.base;
    plan.seed = rng.next();
    char id[16];
    std::snprintf(id, sizeof(id), "P%02zu", p + 1);
    plan.participant_id = id;
    if (spec.vary) {
      plan.gain = spec.base.gain * rng.uniform(0.7, 1.4);
      plan.chew_duration_mean = spec.base.chew_duration_mean * rng.uniform(0.9, 1.1);
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

std::vector<RawRecording> generate_cohort(const CohortSpec& spec) {
  const auto plans = cohort_plans(spec);
  std::vector<std::future<RawRecording>> jobs;
  for (const auto& plan : plans) {
    jobs.push_back(std::async(std::launch::async, [&plan] { return synth::gen_session(plan); }));
  }
  std::vector<RawRecording> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

features::FeatureMatrix cohort_dataset(std::span<const RawRecording> recordings, features::Task task,
                                       const signal::PreprocessConfig& preprocess,
                                       const features::MatrixOptions& options) {
  const auto spec = task == features::Task::Chew ? features::WindowSpec::chew() : features::WindowSpec::swallow();
  std::vector<std::future<features::FeatureMatrix>> jobs;
  for (const auto& rec : recordings) {
    jobs.push_back(std::async(std::launch::async, [&rec, &spec, &preprocess, &options, task] {
      signal::PreprocessConfig pc = preprocess;
      pc.filter.sample_rate = rec.sample_rate;
      return features::build_feature_matrix(signal::preprocess(rec, pc), spec, task, options);
    }));
  }
  features::FeatureMatrix out;
  for (auto& j : jobs) out.append(j.get());
  return out;
}

learn::LinearModel train_rt_model(std::span<const RawRecording> recordings, const realtime::RtConfig& config,
                                  const learn::TrainConfig& train, int stride) {
  if (recordings.empty()) throw ParameterError("train_rt_model: no recordings");
  features::FeatureMatrix all;
  for (const auto& rec : recordings) {
    const auto profile = realtime::calibrate_from_recording(rec, config);
    all.append(realtime::training_matrix(rec, profile, config, stride));
  }
  return learn::train_linear_svm(all, train);
}

}  // namespace chewsense::pipeline
