"""Competing-risks CIF regression, misspecification limits and test studies.

The package implements Fine-Gray and direct-binomial estimation of the
cloglog cumulative-incidence model for two-arm trials, deterministic
probability limits of the treatment-effect estimators when the true
process is intensity-based, the associated hypothesis-test battery, and a
reproducible Monte Carlo study harness.
"""

__version__ = "0.1.0"

from .censoring import KmCurve, ipcw_weight, km_censoring, weighted_response
from .datagen import (CensoringSpec, calibrate_censoring_rate, draw_cif_path,
                      draw_intensity_path, generate_dataset)
from .dataset import Dataset, SubjectRecord
from .directbinomial import (DbExtendedFit, DbFit, DbUnconstrainedFit, db_fit,
                             db_fit_extended, db_fit_unconstrained,
                             db_predict_cif, db_robust_variance, default_grid)
from .errors import (CalibrationError, CiflimitsError, ConfigError,
                     ConvergenceError, DomainError, FitError, SolverError,
                     TestError, VarianceError)
from .finegray import (FgExtendedFit, FgFit, fg_fit, fg_fit_extended,
                       fg_predict_cif, fg_robust_variance, fg_score_test_null)
from .inference import (CoxFit, TestResult, cox_wald, fit_cox_csh,
                        gof_db_contrast, gof_db_wald, gof_fg_wald, gray_test,
                        joint_cox_wald, latouche_sample_size, logrank_cause,
                        wald_cif)
from .limits import (LimitResult, limit_db, limit_f1_curves, limit_fg,
                     limit_grid_sweep)
from .links import LinkFunction, cloglog, inv_cloglog, inv_cloglog_deriv
from .process import (CifGenerativeModel, IntensityModel, adequacy_curve,
                      calibrate_baseline, eval_cif_model, eval_intensity,
                      eval_marginals)
from .stats import chi2_tail, normal_cdf, normal_quantile
from .study import (StudyConfig, StudyResult, ScenarioResult, emit_table,
                    run_study)
