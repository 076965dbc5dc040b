from .analytics import PersonaAnalytics, persona_analytics
from .experiment import (ALL_LLMS, ALL_RANDOM, LLM_CREW_RANDOM_IMPOSTOR, RANDOM_CREW_LLM_IMPOSTOR,
                         SETUPS, ExperimentResult, ExperimentSetup, OutcomeRow, format_table,
                         run_experiment, table_csv, tally_outcomes)
from .interview import (ConstantJudge, InterviewRecord, Interviewer, LLMJudge, category_averages,
                        interview, load_question_bank)
from .ranking import TrajectoryFeature, posterior_table, rank_winning_trajectories
from .speech import (CATEGORIES, FixedAnnotator, KeywordAnnotator, LLMAnnotator, SpeechAnnotation,
                     annotate_speech, category_proportions)
