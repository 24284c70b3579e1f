"""Sample corpus and verification campaigns."""
from .campaigns import (CAMPAIGNS, DEFAULT_TOLERANCES, applicable, run_campaign, run_f_conservation,
                        run_identity_suite, run_main_theorem, run_variation_suite, tolerances)
from .reports import CampaignReport, Criterion, rows_to_csv, summary_table, write_report
from .samples import (BASES, Base, SampleSpec, build_base, corpus_by_name, default_corpus,
                      degenerate_witness)

__all__ = [
    "BASES", "Base", "CAMPAIGNS", "CampaignReport", "Criterion", "DEFAULT_TOLERANCES", "SampleSpec",
    "applicable", "build_base", "corpus_by_name", "default_corpus", "degenerate_witness",
    "rows_to_csv", "run_campaign", "run_f_conservation", "run_identity_suite", "run_main_theorem",
    "run_variation_suite", "summary_table", "tolerances", "write_report",
]
