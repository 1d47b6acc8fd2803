from lorasb.core.logs import configure_logging, logger

def test_run_tag_reaches_console_and_file_sink(tmp_path, capsys):
    configure_logging(level="INFO", log_dir=tmp_path)
    try:
        with logger.contextualize(run="lora_sb/seed0"):
            logger.info("training started")
        logger.debug("not on the console")
        logger.complete()
        err = capsys.readouterr().err
    finally:
        configure_logging()

    assert "lora_sb/seed0 | training started" in err
    assert "not on the console" not in err
    assert list(tmp_path.glob("lorasb_*.log"))

def test_untagged_records_use_placeholder(tmp_path, capsys):
    configure_logging(level="WARNING", log_dir=tmp_path)
    try:
        logger.warning("outside any run")
        err = capsys.readouterr().err
    finally:
        configure_logging()
    assert "| - | outside any run" in err
