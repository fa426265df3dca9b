#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace tactile::sim {

inline constexpr double kSamplePeriod = 0.03;  // seconds between frames

enum class SensorArchetype { DenseNonlinear, SparseLinear };
enum class DatasetKind { A, B, C };
enum class CurvatureClass { R5, R7_5, R10, R20, R40, Flat };

inline constexpr int kCurvatureClassCount = 6;

const char* to_string(SensorArchetype a);
const char* to_string(DatasetKind k);
const char* to_string(CurvatureClass c);
SensorArchetype archetype_from_string(const std::string& s);
DatasetKind dataset_kind_from_string(const std::string& s);
CurvatureClass curvature_from_string(const std::string& s);

// Inverse radius normalized to the sharpest sample: 5mm -> 1, flat -> 0.
double curvature_scaled(CurvatureClass c);

struct Stimulus {
  double force = 0.0;  // N in [0, 5]
  double pitch = 0.0;  // deg in [-3.6, 18]
  double roll = 0.0;   // deg in [-19, 19]
  double shore = 30.0; // Shore A in [0, 30]
  CurvatureClass curvature = CurvatureClass::Flat;

  // Throws std::invalid_argument when a field is outside its range.
  void validate() const;
};

struct SensorModel {
  SensorArchetype archetype = SensorArchetype::DenseNonlinear;
  Eigen::Matrix3Xd taxel_positions;  // unit vectors on the hemisphere
  double gain = 1.0;
  double saturation_force = 1.5;      // F0 [N]; dense response g = F/(F+F0)
  double footprint_base_width = 0.35; // radians
  double activation_threshold = 0.05; // sparse cutoff, normalized units
  double hysteresis_tau = 0.4;        // seconds
  double noise_sigma = 0.01;          // normalized units
  Eigen::VectorXd baseline;
  double force_widening = 0.5;      // footprint gain with force
  double curvature_widening = 0.6;  // footprint gain with curvature
  double shore_widening = 0.4;      // footprint gain with softness
  double angle_scale = 2.2;         // gimbal deg -> hemisphere sweep

  Eigen::Index taxel_count() const { return taxel_positions.cols(); }
  void validate() const;
};

// Shipped defaults: 19-taxel dense_nonlinear or 12-taxel sparse_linear layout
// with the documented parameter set.
SensorModel default_sensor(SensorArchetype archetype);

struct TaxelFrame {
  Eigen::VectorXd values;
  double t = 0.0;
};

struct Record {
  TaxelFrame frame;
  Stimulus stimulus;
};

struct Dataset {
  SensorArchetype archetype = SensorArchetype::DenseNonlinear;
  DatasetKind kind = DatasetKind::A;
  std::uint64_t seed = 0;
  std::vector<Record> records;

  Eigen::Index taxel_count() const;
  Eigen::MatrixXd frame_matrix() const;  // one row per record
  void validate() const;
};

enum class Attribute { Force, Pitch, Roll, Shore };

const char* to_string(Attribute a);
Attribute attribute_from_string(const std::string& s);

// Attributes carried by a dataset kind: A -> force/pitch/roll, B adds shore.
std::vector<Attribute> attributes_of(DatasetKind kind);

Eigen::VectorXd attribute_values(const Dataset& dataset, Attribute attribute);
std::vector<int> curvature_labels(const Dataset& dataset);

// Triangular profile: peak at t = ramp_time, back to zero at 2*ramp_time.
// Throws std::invalid_argument outside [0, 2*ramp_time].
double force_ramp_profile(double t, double peak, double ramp_time);

// Static sensor response, no lag, no noise, t = 0.
TaxelFrame taxel_frame_noiseless(const SensorModel& sensor, const Stimulus& s);

// Stateful first-order lag plus i.i.d. Gaussian noise; one step per 30 ms.
// The lag state is primed with the first stimulus's noiseless frame.
class SensorStream {
 public:
  SensorStream(SensorModel sensor, std::uint64_t seed, double t_start = 0.0);

  TaxelFrame step(const Stimulus& s);
  const SensorModel& sensor() const { return sensor_; }

 private:
  SensorModel sensor_;
  std::mt19937_64 rng_;
  Eigen::VectorXd lag_state_;
  double t_ = 0.0;
  bool primed_ = false;
};

std::vector<TaxelFrame> simulate_sequence(const SensorModel& sensor,
                                          const std::vector<Stimulus>& schedule,
                                          std::uint64_t seed, double t_start = 0.0);

struct GridSpec {
  int roll_points = 7;        // datasets A and B
  int pitch_points = 7;       // datasets A and B
  int shore_points = 5;       // dataset B
  int frames_per_class = 2000;  // dataset C
  int force_dwell_steps = 33;   // dataset C: steps each drawn force is held
  double ramp_time = 15.0;      // seconds per up-sweep (A and B)
  double peak_force = 5.0;

  void validate(DatasetKind kind) const;
  int frames_per_ramp() const;
};

Dataset generate_dataset(DatasetKind kind, const SensorModel& sensor,
                         const GridSpec& spec, std::uint64_t seed);

}  // namespace tactile::sim
