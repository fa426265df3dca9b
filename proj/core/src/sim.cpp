#include "tactile/sim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "tactile/rng.hpp"

namespace tactile::sim {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kGoldenAngle = 2.399963229728653;

Eigen::Vector3d hemisphere_point(double polar, double azimuth) {
  return {std::sin(polar) * std::cos(azimuth), std::sin(polar) * std::sin(azimuth),
          std::cos(polar)};
}

// Quasi-uniform spiral over the full hemisphere cap.
Eigen::Matrix3Xd dense_layout() {
  constexpr int n = 19;
  Eigen::Matrix3Xd pts(3, n);
  for (int i = 0; i < n; ++i) {
    const double cos_polar = 1.0 - (i + 0.5) / static_cast<double>(n);
    pts.col(i) = hemisphere_point(std::acos(cos_polar), i * kGoldenAngle);
  }
  return pts;
}

// Three sparse rings; the gap at the pole keeps few taxels inside a centred
// footprint, mirroring the selective activation of the 12-taxel archetype.
Eigen::Matrix3Xd sparse_layout() {
  Eigen::Matrix3Xd pts(3, 12);
  int col = 0;
  const struct {
    double polar;
    int count;
    double azimuth0;
  } rings[] = {{0.5, 3, 0.0}, {1.0, 4, 0.5}, {1.35, 5, 1.0}};
  for (const auto& ring : rings) {
    for (int i = 0; i < ring.count; ++i) {
      const double azimuth =
          ring.azimuth0 + 2.0 * std::numbers::pi * i / static_cast<double>(ring.count);
      pts.col(col++) = hemisphere_point(ring.polar, azimuth);
    }
  }
  return pts;
}

Eigen::Vector3d contact_center(double pitch_deg, double roll_deg, double scale) {
  const double tx = roll_deg * kDegToRad * scale;
  const double ty = pitch_deg * kDegToRad * scale;
  const double rho = std::hypot(tx, ty);
  if (rho < 1e-15) return {0.0, 0.0, 1.0};
  return {std::sin(rho) * tx / rho, std::sin(rho) * ty / rho, std::cos(rho)};
}

}  // namespace

const char* to_string(SensorArchetype a) {
  return a == SensorArchetype::DenseNonlinear ? "dense_nonlinear" : "sparse_linear";
}

const char* to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::A:
      return "A";
    case DatasetKind::B:
      return "B";
    case DatasetKind::C:
      return "C";
  }
  return "A";
}

const char* to_string(CurvatureClass c) {
  switch (c) {
    case CurvatureClass::R5:
      return "r5";
    case CurvatureClass::R7_5:
      return "r7.5";
    case CurvatureClass::R10:
      return "r10";
    case CurvatureClass::R20:
      return "r20";
    case CurvatureClass::R40:
      return "r40";
    case CurvatureClass::Flat:
      return "flat";
  }
  return "flat";
}

SensorArchetype archetype_from_string(const std::string& s) {
  if (s == "dense_nonlinear" || s == "dense") return SensorArchetype::DenseNonlinear;
  if (s == "sparse_linear" || s == "sparse") return SensorArchetype::SparseLinear;
  throw std::invalid_argument("unknown sensor archetype: " + s);
}

DatasetKind dataset_kind_from_string(const std::string& s) {
  if (s == "A") return DatasetKind::A;
  if (s == "B") return DatasetKind::B;
  if (s == "C") return DatasetKind::C;
  throw std::invalid_argument("unknown dataset kind: " + s);
}

CurvatureClass curvature_from_string(const std::string& s) {
  if (s == "r5") return CurvatureClass::R5;
  if (s == "r7.5") return CurvatureClass::R7_5;
  if (s == "r10") return CurvatureClass::R10;
  if (s == "r20") return CurvatureClass::R20;
  if (s == "r40") return CurvatureClass::R40;
  if (s == "flat") return CurvatureClass::Flat;
  throw std::invalid_argument("unknown curvature class: " + s);
}

double curvature_scaled(CurvatureClass c) {
  switch (c) {
    case CurvatureClass::R5:
      return 1.0;
    case CurvatureClass::R7_5:
      return 5.0 / 7.5;
    case CurvatureClass::R10:
      return 0.5;
    case CurvatureClass::R20:
      return 0.25;
    case CurvatureClass::R40:
      return 0.125;
    case CurvatureClass::Flat:
      return 0.0;
  }
  return 0.0;
}

const char* to_string(Attribute a) {
  switch (a) {
    case Attribute::Force:
      return "force";
    case Attribute::Pitch:
      return "pitch";
    case Attribute::Roll:
      return "roll";
    case Attribute::Shore:
      return "shore";
  }
  return "force";
}

Attribute attribute_from_string(const std::string& s) {
  if (s == "force") return Attribute::Force;
  if (s == "pitch") return Attribute::Pitch;
  if (s == "roll") return Attribute::Roll;
  if (s == "shore") return Attribute::Shore;
  throw std::invalid_argument("unknown attribute: " + s);
}

std::vector<Attribute> attributes_of(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::A:
      return {Attribute::Force, Attribute::Pitch, Attribute::Roll};
    case DatasetKind::B:
      return {Attribute::Force, Attribute::Pitch, Attribute::Roll, Attribute::Shore};
    case DatasetKind::C:
      return {Attribute::Force};
  }
  return {};
}

void Stimulus::validate() const {
  auto in_range = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
  if (!in_range(force, 0.0, 5.0)) {
    throw std::invalid_argument("force out of range [0,5]: " + std::to_string(force));
  }
  if (!in_range(pitch, -3.6, 18.0)) {
    throw std::invalid_argument("pitch out of range [-3.6,18]: " +
                                std::to_string(pitch));
  }
  if (!in_range(roll, -19.0, 19.0)) {
    throw std::invalid_argument("roll out of range [-19,19]: " + std::to_string(roll));
  }
  if (!in_range(shore, 0.0, 30.0)) {
    throw std::invalid_argument("shore out of range [0,30]: " + std::to_string(shore));
  }
}

void SensorModel::validate() const {
  const Eigen::Index expected =
      archetype == SensorArchetype::DenseNonlinear ? 19 : 12;
  if (taxel_count() != expected) {
    throw std::invalid_argument("taxel count does not match archetype");
  }
  if (baseline.size() != taxel_count()) {
    throw std::invalid_argument("baseline width does not match taxel count");
  }
  if (saturation_force <= 0.0) throw std::invalid_argument("F0 must be > 0");
  if (footprint_base_width <= 0.0) {
    throw std::invalid_argument("footprint width must be > 0");
  }
  if (noise_sigma < 0.0) throw std::invalid_argument("noise_sigma must be >= 0");
}

SensorModel default_sensor(SensorArchetype archetype) {
  SensorModel sensor;
  sensor.archetype = archetype;
  if (archetype == SensorArchetype::DenseNonlinear) {
    sensor.taxel_positions = dense_layout();
    sensor.hysteresis_tau = 0.4;
  } else {
    sensor.taxel_positions = sparse_layout();
    sensor.hysteresis_tau = 0.1;
  }
  sensor.baseline = Eigen::VectorXd::Constant(sensor.taxel_count(), 0.5);
  return sensor;
}

Eigen::Index Dataset::taxel_count() const {
  if (records.empty()) throw std::invalid_argument("dataset has no records");
  return records.front().frame.values.size();
}

Eigen::MatrixXd Dataset::frame_matrix() const {
  const Eigen::Index d = taxel_count();
  Eigen::MatrixXd frames(static_cast<Eigen::Index>(records.size()), d);
  for (std::size_t i = 0; i < records.size(); ++i) {
    frames.row(static_cast<Eigen::Index>(i)) = records[i].frame.values;
  }
  return frames;
}

void Dataset::validate() const {
  if (records.empty()) throw std::invalid_argument("dataset has no records");
  const Eigen::Index d = records.front().frame.values.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Record& r = records[i];
    if (r.frame.values.size() != d) {
      throw std::invalid_argument("frame width differs at record " + std::to_string(i));
    }
    if (!r.frame.values.allFinite()) {
      throw std::invalid_argument("non-finite frame at record " + std::to_string(i));
    }
    if (r.frame.t < 0.0) {
      throw std::invalid_argument("negative timestamp at record " + std::to_string(i));
    }
    const double periods = r.frame.t / kSamplePeriod;
    if (std::abs(periods - std::round(periods)) * kSamplePeriod > 1e-6) {
      throw std::invalid_argument("timestamp off the 30 ms grid at record " +
                                  std::to_string(i));
    }
    r.stimulus.validate();
  }
}

Eigen::VectorXd attribute_values(const Dataset& dataset, Attribute attribute) {
  Eigen::VectorXd values(static_cast<Eigen::Index>(dataset.records.size()));
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const Stimulus& s = dataset.records[i].stimulus;
    double v = 0.0;
    switch (attribute) {
      case Attribute::Force:
        v = s.force;
        break;
      case Attribute::Pitch:
        v = s.pitch;
        break;
      case Attribute::Roll:
        v = s.roll;
        break;
      case Attribute::Shore:
        v = s.shore;
        break;
    }
    values(static_cast<Eigen::Index>(i)) = v;
  }
  return values;
}

std::vector<int> curvature_labels(const Dataset& dataset) {
  std::vector<int> labels(dataset.records.size());
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    labels[i] = static_cast<int>(dataset.records[i].stimulus.curvature);
  }
  return labels;
}

double force_ramp_profile(double t, double peak, double ramp_time) {
  if (ramp_time <= 0.0) throw std::invalid_argument("ramp_time must be > 0");
  if (t < 0.0 || t > 2.0 * ramp_time) {
    throw std::invalid_argument("t outside the ramp domain [0, 2*ramp_time]");
  }
  if (t <= ramp_time) return peak * t / ramp_time;
  return peak * (2.0 * ramp_time - t) / ramp_time;
}

TaxelFrame taxel_frame_noiseless(const SensorModel& sensor, const Stimulus& s) {
  s.validate();
  const double width =
      sensor.footprint_base_width * (1.0 + sensor.force_widening * s.force / 5.0) *
      (1.0 + sensor.curvature_widening * curvature_scaled(s.curvature)) *
      (1.0 + sensor.shore_widening * (30.0 - s.shore) / 30.0);
  const Eigen::Vector3d center =
      contact_center(s.pitch, s.roll, sensor.angle_scale);

  double amplitude = 0.0;
  if (sensor.archetype == SensorArchetype::DenseNonlinear) {
    amplitude = sensor.gain * s.force / (s.force + sensor.saturation_force);
  } else {
    amplitude = sensor.gain * s.force / 5.0;
  }

  const Eigen::Index n = sensor.taxel_count();
  Eigen::VectorXd deflection(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double dot =
        std::clamp(sensor.taxel_positions.col(i).dot(center), -1.0, 1.0);
    const double dist = std::acos(dot);
    deflection(i) = amplitude * std::exp(-dist * dist / (2.0 * width * width));
  }
  if (sensor.archetype == SensorArchetype::SparseLinear) {
    deflection = (deflection.array() < sensor.activation_threshold)
                     .select(0.0, deflection);
  }

  TaxelFrame frame;
  frame.t = 0.0;
  if (sensor.archetype == SensorArchetype::DenseNonlinear) {
    frame.values = sensor.baseline - deflection;
  } else {
    frame.values = sensor.baseline + deflection;
  }
  return frame;
}

SensorStream::SensorStream(SensorModel sensor, std::uint64_t seed, double t_start)
    : sensor_(std::move(sensor)), rng_(make_rng(seed)), t_(t_start) {
  sensor_.validate();
}

TaxelFrame SensorStream::step(const Stimulus& s) {
  TaxelFrame frame = taxel_frame_noiseless(sensor_, s);
  if (!primed_) {
    lag_state_ = frame.values;
    primed_ = true;
  } else {
    const double alpha = sensor_.hysteresis_tau > 0.0
                             ? std::min(1.0, kSamplePeriod / sensor_.hysteresis_tau)
                             : 1.0;
    lag_state_ += alpha * (frame.values - lag_state_);
  }
  frame.values = lag_state_;
  if (sensor_.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sensor_.noise_sigma);
    for (Eigen::Index i = 0; i < frame.values.size(); ++i) {
      frame.values(i) += noise(rng_);
    }
  }
  frame.t = t_;
  t_ += kSamplePeriod;
  return frame;
}

std::vector<TaxelFrame> simulate_sequence(const SensorModel& sensor,
                                          const std::vector<Stimulus>& schedule,
                                          std::uint64_t seed, double t_start) {
  if (schedule.empty()) throw std::invalid_argument("empty schedule");
  SensorStream stream(sensor, seed, t_start);
  std::vector<TaxelFrame> frames;
  frames.reserve(schedule.size());
  for (const Stimulus& s : schedule) frames.push_back(stream.step(s));
  return frames;
}

void GridSpec::validate(DatasetKind kind) const {
  if (peak_force <= 0.0 || peak_force > 5.0) {
    throw std::invalid_argument("peak_force must be in (0,5]");
  }
  switch (kind) {
    case DatasetKind::A:
      if (roll_points < 1 || pitch_points < 1 || ramp_time <= 0.0) {
        throw std::invalid_argument("dataset A needs a positive angle grid and ramp");
      }
      break;
    case DatasetKind::B:
      if (roll_points < 1 || pitch_points < 1 || shore_points < 1 || ramp_time <= 0.0) {
        throw std::invalid_argument("dataset B needs positive angle and shore grids");
      }
      break;
    case DatasetKind::C:
      if (frames_per_class < 1 || force_dwell_steps < 1) {
        throw std::invalid_argument("dataset C needs positive frame counts");
      }
      break;
  }
}

int GridSpec::frames_per_ramp() const {
  return static_cast<int>(std::round(2.0 * ramp_time / kSamplePeriod));
}

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  if (n == 1) {
    v[0] = 0.5 * (lo + hi);
    return v;
  }
  for (int i = 0; i < n; ++i) {
    v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / static_cast<double>(n - 1);
  }
  return v;
}

// One triangular force ramp at fixed geometry; its own noise stream.
void append_ramp(Dataset& dataset, const SensorModel& sensor, const GridSpec& spec,
                 const Stimulus& geometry, std::uint64_t ramp_seed,
                 std::uint64_t ramp_index) {
  const int frames = spec.frames_per_ramp();
  std::vector<Stimulus> schedule(static_cast<std::size_t>(frames), geometry);
  for (int k = 0; k < frames; ++k) {
    const double t_local = k * kSamplePeriod;
    schedule[static_cast<std::size_t>(k)].force =
        force_ramp_profile(t_local, spec.peak_force, spec.ramp_time);
  }
  const double t_start = static_cast<double>(ramp_index) * frames * kSamplePeriod;
  std::vector<TaxelFrame> sensed =
      simulate_sequence(sensor, schedule, ramp_seed, t_start);
  for (int k = 0; k < frames; ++k) {
    dataset.records.push_back(
        {std::move(sensed[static_cast<std::size_t>(k)]),
         schedule[static_cast<std::size_t>(k)]});
  }
}

}  // namespace

Dataset generate_dataset(DatasetKind kind, const SensorModel& sensor,
                         const GridSpec& spec, std::uint64_t seed) {
  sensor.validate();
  spec.validate(kind);

  Dataset dataset;
  dataset.archetype = sensor.archetype;
  dataset.kind = kind;
  dataset.seed = seed;

  switch (kind) {
    case DatasetKind::A: {
      const auto rolls = linspace(-19.0, 19.0, spec.roll_points);
      const auto pitches = linspace(-3.6, 18.0, spec.pitch_points);
      std::uint64_t ramp_index = 0;
      for (double roll : rolls) {
        for (double pitch : pitches) {
          Stimulus geometry;
          geometry.roll = roll;
          geometry.pitch = pitch;
          geometry.shore = 30.0;  // flat plastic sample
          geometry.curvature = CurvatureClass::Flat;
          append_ramp(dataset, sensor, spec, geometry, derive_seed(seed, ramp_index),
                      ramp_index);
          ++ramp_index;
        }
      }
      break;
    }
    case DatasetKind::B: {
      const auto rolls = linspace(-19.0, 19.0, spec.roll_points);
      const auto pitches = linspace(-3.6, 18.0, spec.pitch_points);
      const auto shores = linspace(0.0, 30.0, spec.shore_points);
      std::uint64_t ramp_index = 0;
      for (double roll : rolls) {
        for (double pitch : pitches) {
          for (double shore : shores) {
            Stimulus geometry;
            geometry.roll = roll;
            geometry.pitch = pitch;
            geometry.shore = shore;
            geometry.curvature = CurvatureClass::Flat;
            append_ramp(dataset, sensor, spec, geometry, derive_seed(seed, ramp_index),
                        ramp_index);
            ++ramp_index;
          }
        }
      }
      break;
    }
    case DatasetKind::C: {
      for (int cls = 0; cls < kCurvatureClassCount; ++cls) {
        const auto unit = static_cast<std::uint64_t>(cls);
        auto force_rng = make_rng(derive_seed(seed, unit, 0));
        std::uniform_real_distribution<double> force_dist(0.0, spec.peak_force);
        std::vector<Stimulus> schedule(static_cast<std::size_t>(spec.frames_per_class));
        double held = 0.0;
        for (int k = 0; k < spec.frames_per_class; ++k) {
          if (k % spec.force_dwell_steps == 0) held = force_dist(force_rng);
          Stimulus s;
          s.force = held;
          s.shore = 30.0;  // printed plastic samples
          s.curvature = static_cast<CurvatureClass>(cls);
          schedule[static_cast<std::size_t>(k)] = s;
        }
        const double t_start =
            static_cast<double>(cls) * spec.frames_per_class * kSamplePeriod;
        std::vector<TaxelFrame> sensed =
            simulate_sequence(sensor, schedule, derive_seed(seed, unit, 1), t_start);
        for (int k = 0; k < spec.frames_per_class; ++k) {
          dataset.records.push_back({std::move(sensed[static_cast<std::size_t>(k)]),
                                     schedule[static_cast<std::size_t>(k)]});
        }
      }
      break;
    }
  }
  dataset.validate();
  return dataset;
}

}  // namespace tactile::sim
