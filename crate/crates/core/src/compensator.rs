//! Compensator structures and least-squares fitting (in progress).
