# Generated by Django 4.0.4 on 2026-10-18 09:12

from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='SweepRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('fingerprint', models.CharField(db_index=True, max_length=32)),
                ('config', models.JSONField()),
                ('eps_list', models.JSONField(default=list)),
                ('kappa_measured', models.FloatField(blank=True, null=True)),
                ('r_squared', models.FloatField(blank=True, null=True)),
                ('partial', models.BooleanField(default=False)),
                ('summary', models.JSONField(blank=True, null=True)),
                ('output_dir', models.CharField(blank=True, max_length=512)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
        ),
        migrations.CreateModel(
            name='SimulationRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('mode', models.CharField(choices=[('vm', 'Vlasov-Maxwell'), ('vp', 'Vlasov-Poisson'), ('pair', 'Paired run'), ('sweep', 'Sweep member'), ('ck', 'Successive approximations'), ('verify', 'Verification suite')], default='pair', max_length=8)),
                ('eps', models.FloatField(blank=True, null=True)),
                ('config', models.JSONField()),
                ('fingerprint', models.CharField(db_index=True, max_length=32)),
                ('status', models.CharField(choices=[('PENDING', 'Pending'), ('FINISHED', 'Finished'), ('ABORTED', 'Aborted')], default='PENDING', max_length=10)),
                ('truncation_time', models.FloatField(blank=True, null=True)),
                ('report', models.JSONField(blank=True, null=True)),
                ('output_dir', models.CharField(blank=True, max_length=512)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
                ('sweep', models.ForeignKey(blank=True, null=True, on_delete=django.db.models.deletion.CASCADE, related_name='members', to='harness.sweeprun')),
            ],
            options={
                'ordering': ['-pk'],
            },
        ),
    ]
