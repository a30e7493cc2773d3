#pragma once

#include "chewsense/features.hpp"
#include "chewsense/learn.hpp"
#include "chewsense/realtime.hpp"
#include "chewsense/synth.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace chewsense::pipeline {

/// A group of synthetic participants sharing one session plan. Each
/// participant gets its own seed and a mildly different electrode gain and
/// chewing rhythm.
struct CohortSpec {
  std::size_t participants = 6;
  synth::SessionPlan base;
  std::uint64_t seed = 1;
  bool vary = true;
};

std::vector<synth::SessionPlan> cohort_plans(const CohortSpec& spec);

/// Sessions are generated concurrently; the result is ordered by participant.
std::vector<RawRecording> generate_cohort(const CohortSpec& spec);

/// Preprocess each recording and stack the window features of every
/// participant into one dataset.
features::FeatureMatrix cohort_dataset(std::span<const RawRecording> recordings, features::Task task,
                                       const signal::PreprocessConfig& preprocess = {},
                                       const features::MatrixOptions& options = {});

/// Streaming model trained on the rows of `training_matrix` over every
/// recording, each calibrated on itself.
learn::LinearModel train_rt_model(std::span<const RawRecording> recordings, const realtime::RtConfig& config,
                                  const learn::TrainConfig& train = {}, int stride = 2);

}  // namespace chewsense::pipeline
