class LocaleConfig:
    LOCALES = {
        'ja': {
            'common': {
                'run_started': '🟢 実験開始',
                'run_finished': '✅ 実験完了',
                'gates_passed': '✅ すべてのゲートに合格しました',
                'gates_failed': '❌ ゲート不合格',
                'config_error': '❌ 設定エラー',
                'interrupted': '🔴 中断されました',
                'written': '📄 出力しました',
                'unknown_experiment': '⚠️ 未登録の実験',
                'cross_check': '📊 クロスチェック最大偏差',
            },
            'gate': {
                'passed': '合格',
                'failed': '不合格',
                'skipped': 'スキップ',
            },
        },
        'zh': {
            'common': {
                'run_started': '🟢 实验开始',
                'run_finished': '✅ 实验完成',
                'gates_passed': '✅ 全部闸门通过',
                'gates_failed': '❌ 闸门未通过',
                'config_error': '❌ 配置错误',
                'interrupted': '🔴 运行被中断',
                'written': '📄 已写出',
                'unknown_experiment': '⚠️ 未注册的实验',
                'cross_check': '📊 交叉校验最大偏差',
            },
            'gate': {
                'passed': '通过',
                'failed': '未通过',
                'skipped': '跳过',
            },
        },
        'en': {
            'common': {
                'run_started': '🟢 Experiment started',
                'run_finished': '✅ Experiment finished',
                'gates_passed': '✅ All gates passed',
                'gates_failed': '❌ Gate failure',
                'config_error': '❌ Config error',
                'interrupted': '🔴 Run interrupted',
                'written': '📄 Written',
                'unknown_experiment': '⚠️ Unknown experiment',
                'cross_check': '📊 Cross-check max deviation',
            },
            'gate': {
                'passed': 'passed',
                'failed': 'failed',
                'skipped': 'skipped',
            },
        },
    }

    @classmethod
    def _section(cls, locale, section):
        # LANG 可能是 zh_CN.UTF-8 之类
        key = (locale or 'zh').split('_')[0].split('.')[0].lower()
        return cls.LOCALES.get(key, cls.LOCALES['zh'])[section]

    @classmethod
    def get_common(cls, locale='zh'):
        return cls._section(locale, 'common')

    @classmethod
    def get_gate(cls, locale='zh'):
        return cls._section(locale, 'gate')


class Locale:
    def __init__(self, locale='zh'):
        self.locale = locale
        self.common_map = LocaleConfig.get_common(locale)
        self.gate_map = LocaleConfig.get_gate(locale)

    def common(self, key):
        """获取通用文本"""
        return self.common_map.get(key, key)

    def gate(self, key):
        """获取闸门状态文本"""
        return self.gate_map.get(key, key)
