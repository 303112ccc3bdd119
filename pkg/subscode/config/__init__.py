from subscode.config.settings import PipelineConfig, derive_seed, load_pipeline_config, settings

__all__ = ["PipelineConfig", "derive_seed", "load_pipeline_config", "settings"]
