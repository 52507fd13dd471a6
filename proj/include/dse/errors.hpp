#pragma once

#include <stdexcept>
#include <string>

namespace dse {

// Base for all library errors. The CLI maps InfeasibleError to exit code 2
// and everything else to 1.
class Error : public std::runtime_error
{
public:
	using std::runtime_error::runtime_error;
};

class ValidationError : public Error
{
public:
	using Error::Error;
};

class UnstableError : public Error
{
public:
	using Error::Error;
};

class IoError : public Error
{
public:
	IoError(const std::string& path, const std::string& what)
		: Error(path + ": " + what), path_(path)
	{
	}
	const std::string& path() const { return path_; }

private:
	std::string path_;
};

// Gain design could not reach the requested stability margin.
class InfeasibleError : public Error
{
public:
	InfeasibleError(const std::string& what, double best_rho)
		: Error(what), best_rho_(best_rho)
	{
	}
	double best_rho() const { return best_rho_; }

private:
	double best_rho_;
};

// Stable design found but the isolation ratios could not be repaired.
class IsolationInfeasibleError : public InfeasibleError
{
public:
	using InfeasibleError::InfeasibleError;
};

class ThresholdUndefinedError : public Error
{
public:
	using Error::Error;
};

class NoSubstituteError : public Error
{
public:
	using Error::Error;
};

} // namespace dse
