from pydantic_settings import BaseSettings, SettingsConfigDict


class AppSetting(BaseSettings):
    LOG_FILE: str = "log.txt"
    LOG_LEVEL: str = "INFO"
    OUTPUT_DIR: str = "runs"
    WORKERS: int = 1

    model_config = SettingsConfigDict(
        env_file=".env", env_file_encoding="utf-8", env_prefix="LOGPLAP_", extra="ignore"
    )


settings = AppSetting()
