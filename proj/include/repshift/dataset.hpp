#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace repshift {

/// One subject: m observations stored as columns of a d x m matrix,
/// with optional responses (empty vector when absent).
struct Subject {
    std::string id;
    Eigen::MatrixXd x;
    Eigen::VectorXd y;

    Eigen::Index num_observations() const { return x.cols(); }
    bool has_responses() const { return y.size() > 0; }
};

/// Repeated-measurements data: independent subjects, correlated
/// observations within a subject. Subjects are the unit of splitting.
class RepeatedDataset {
public:
    RepeatedDataset() = default;
    explicit RepeatedDataset(int d) : d_(d) {}
    RepeatedDataset(int d, std::vector<Subject> subjects);

    int dim() const noexcept { return d_; }
    std::size_t num_subjects() const noexcept { return subjects_.size(); }
    Eigen::Index num_observations() const;
    bool empty() const noexcept { return subjects_.empty(); }
    /// True when every subject carries responses (false for an empty set).
    bool has_responses() const;

    const std::vector<Subject>& subjects() const noexcept { return subjects_; }
    const Subject& subject(std::size_t i) const { return subjects_.at(i); }

    /// Appends a subject after checking its shape.
    void add(Subject s);

    /// All observations as columns, subjects in order.
    Eigen::MatrixXd covariates() const;
    /// All responses, aligned with covariates(). Throws ContractError if absent.
    Eigen::VectorXd responses() const;

    /// Throws DomainError if any coordinate is outside [0, 1] or non-finite.
    void check_unit_cube() const;

    /// Subset with the given subject indices, in that order.
    RepeatedDataset subset(const std::vector<std::size_t>& indices) const;

private:
    void check_subject(const Subject& s) const;

    int d_ = 0;
    std::vector<Subject> subjects_;
};

}  // namespace repshift
